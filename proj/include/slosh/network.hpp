#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slosh/autodiff.hpp"
#include "slosh/conv_kernels.hpp"

namespace slosh {

struct NetworkConfig {
  std::array<int, 5> widths{32, 64, 64, 64, 64};
  int input_width = 32;   // Type-TFF branch width C0
  int fc_width = 16;      // width of every global (FC) feature
  int fusion_width = 16;  // channels of φ and of λ's hidden layer
  double radius = 4.5 * 0.025;
  double output_scale = 1.0 / 128.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError; Res-TFF needs widths[1] == widths[3].
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Activations captured at one TFF site.
struct TffTrace {
  std::string name;
  Matrix f1p;  // f₁ ⊕ f_FC
  Matrix f2p;  // f₂ ⊕ f_FC
  Matrix omega;
  Matrix out;
};

/// Optional instrumentation filled by Network::forward.
struct ForwardTrace {
  std::vector<TffTrace> tff;          // in evaluation order
  std::array<Matrix, 5> layer_out;    // relu(Main-TFF_k), before the residual join
  Matrix res_in1, res_in2;            // inputs the Res-TFF actually consumed
  Matrix head_in;
};

/// Per-frame network inputs. Fluid positions/velocities are tape variables
/// so rollouts can differentiate through them; boundary data is constant.
struct NetInputs {
  Var fluid_pos;   // N × 3 (x*)
  Var fluid_vel;   // N × 3 (v*)
  Matrix boundary_pos;      // M × 3
  Matrix boundary_normals;  // M × 3
};

/// Mean-pooled dense feature: mean_i(f_i W + b), as a 1 × out row.
/// Throws InputError for zero rows.
Var global_feature(Var features, Var weight, Var bias);

/// Parameters of one two-way fusion module, looked up by name prefix.
struct TffWeights {
  Var phi1, phi2, lam1, lam1_b, lam2, lam2_b;
};
TffWeights tff_weights(Tape& tape, const ParamStore& store, const std::string& prefix);

/// Eq. 5–8: f₁′ = f₁ ⊕ f_FC, f₂′ = f₂ ⊕ f_FC,
/// ω = sigmoid(λ₂ * relu(λ₁ * (φ₁ * f₁′ ⊕ φ₂ * f₂′) + b₁) + b₂),
/// out = ω ⊙ f₁′ + (1 − ω) ⊙ f₂′. `fc` is a 1 × c row broadcast to all
/// particles; `geometry` is the fluid self geometry.
Var tff_forward(const TffWeights& w, Var f1, Var f2, Var fc,
                const std::shared_ptr<const conv::ConvGeometry>& geometry, Var positions,
                TffTrace* trace = nullptr);

class Network {
 public:
  explicit Network(const NetworkConfig& config);
  Network(const NetworkConfig& config, ParamStore params);

  const NetworkConfig& config() const { return config_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  /// Per-fluid-particle Δx (N × 3). Throws NumericalError naming the
  /// stage where an activation stopped being finite.
  Var forward(Tape& tape, const NetInputs& in, ForwardTrace* trace = nullptr) const;

  /// Gradient-free convenience wrapper.
  Matrix predict(const Matrix& fluid_pos, const Matrix& fluid_vel, const Matrix& boundary_pos,
                 const Matrix& boundary_normals) const;

  bool operator==(const Network& o) const { return config_ == o.config_ && params_ == o.params_; }

 private:
  NetworkConfig config_;
  ParamStore params_;
};

/// Parameters in the order Network's constructor creates them.
ParamStore init_params(const NetworkConfig& config);

/// Versioned binary checkpoint: header, config, manifest (name, shape, byte
/// offset), little-endian f64 payload, FNV-1a checksum.
std::string serialize_checkpoint(const Network& net);
Network deserialize_checkpoint(std::string_view bytes, const std::string& what = "checkpoint");
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace slosh
