#include "slosh/pbf.hpp"

#include <chrono>
#include <string>

#include "slosh/errors.hpp"

namespace slosh {

void FrameSequence::push(const ParticleSet& state, const Scene& scene) {
  frames.push_back(state);
  transforms.push_back({scene.orientation, scene.center});
}

void FrameSequence::validate() const {
  if (transforms.size() != frames.size()) throw ConfigError("frame sequence: one transform per frame required");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].size() != frames[0].size())
      throw ConfigError("frame sequence: frame " + std::to_string(i) + " has a different particle count");
    if (frames[i].kinds != frames[0].kinds)
      throw ConfigError("frame sequence: frame " + std::to_string(i) + " has different particle kinds");
  }
}

Matrix to_matrix(std::span<const Vec3> pts) {
  Matrix m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

std::vector<Vec3> to_points(const Matrix& m) {
  std::vector<Vec3> pts(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) pts[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return pts;
}

Intermediate predict_intermediate(std::span<const Vec3> x, std::span<const Vec3> v, const Vec3& g, double dt) {
  if (x.size() != v.size()) throw ConfigError("predict_intermediate: position/velocity count mismatch");
  Intermediate out;
  out.x.resize(x.size());
  out.v.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.v[i] = v[i] + dt * g;
    out.x[i] = x[i] + dt * out.v[i];
  }
  return out;
}

Intermediate correct(std::span<const Vec3> x, std::span<const Vec3> x_star, std::span<const Vec3> dx, double dt) {
  if (x.size() != x_star.size() || x.size() != dx.size()) throw ConfigError("correct: array lengths differ");
  Intermediate out;
  out.x.resize(x.size());
  out.v.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.x[i] = x_star[i] + dx[i];
    out.v[i] = (out.x[i] - x[i]) / dt;
  }
  return out;
}

StepVars step_tape(Tape& tape, const Network& net, Var x, Var v, const Matrix& boundary_pos,
                   const Matrix& boundary_normals, const SimConfig& config) {
  const double dt = config.dt;
  const Matrix g = config.gravity.transpose().replicate(x.rows(), 1);
  const Var v_star = ad::add(v, tape.constant(dt * g));
  const Var x_star = ad::add(x, ad::scale(v_star, dt));
  const Var dx = net.forward(tape, {x_star, v_star, boundary_pos, boundary_normals});
  const Var x_next = ad::add(x_star, dx);
  const Var v_next = ad::scale(ad::sub(x_next, x), 1.0 / dt);
  return {x_next, v_next};
}

void step(const Network& net, ParticleSet& state, const SimConfig& config) {
  const auto fluid = state.indices_of(Kind::Fluid);
  const auto bidx = state.indices_of(Kind::Boundary);
  std::vector<Vec3> x, v, bx, bn;
  for (auto i : fluid) {
    x.push_back(state.positions[i]);
    v.push_back(state.velocities[i]);
  }
  for (auto i : bidx) {
    bx.push_back(state.positions[i]);
    bn.push_back(state.normals[i]);
  }
  const Intermediate star = predict_intermediate(x, v, config.gravity, config.dt);
  const Matrix dx = net.predict(to_matrix(star.x), to_matrix(star.v), to_matrix(bx), to_matrix(bn));
  const Intermediate next = correct(x, star.x, to_points(dx), config.dt);
  for (std::size_t k = 0; k < fluid.size(); ++k) {
    state.positions[fluid[k]] = next.x[k];
    state.velocities[fluid[k]] = next.v[k];
  }
}

FrameSequence rollout(const Network& net, const ParticleSet& initial, const Scene& scene,
                      const std::vector<ScheduledRotation>& schedule, std::size_t frames, const SimConfig& config) {
  if (frames < 1) throw InputError("rollout: need at least one frame");
  ParticleSet state = initial;
  Scene sc = scene;
  FrameSequence seq;
  seq.dt = config.dt;
  seq.rotations = schedule;
  auto apply_rotations = [&](std::size_t f) {
    for (const auto& r : schedule)
      if (r.frame == f) rotate_rigid(state, sc, r.pitch, r.roll);
  };
  apply_rotations(0);
  seq.push(state, sc);
  double seconds = 0.0;
  for (std::size_t f = 1; f <= frames; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      step(net, state, config);
    } catch (const NumericalError& e) {
      throw NumericalError("rollout: frame " + std::to_string(f) + ": " + e.what());
    }
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!state.all_finite()) throw NumericalError("rollout: non-finite state at frame " + std::to_string(f));
    apply_rotations(f);
    seq.push(state, sc);
  }
  seq.seconds_per_frame = seconds / static_cast<double>(frames);
  return seq;
}

}  // namespace slosh
