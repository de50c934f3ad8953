#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <utility>
#include <vector>

#include "billiards/surface.hpp"

namespace billiards {

/// Point of the unit-ball bundle: base point x, outgoing projected velocity v and
/// v_hat = sqrt(1 - |v|^2) = sin(phi).
struct PhasePoint {
  Vec x;
  Vec v;
  double v_hat = 1.0;

  /// Reflection angle measured from the tangent plane.
  double angle() const { return std::atan2(v_hat, v.norm()); }
  double speed() const { return v.norm(); }
};

/// One chord x -> y with the tangential data of the generating function:
/// v = pi_x(u), w = pi_y(u) for the unit chord direction u (w taken before reflection).
struct ChordData {
  Vec x;
  Vec y;
  double length = 0.0;
  Vec v;
  Vec w;
  double v_hat = 0.0;
  double w_hat = 0.0;
};

/// Points x_0 .. x_N with the chords between them. `states[k]` is the outgoing
/// phase point at x_k for k < N.
struct OrbitSegment {
  std::vector<Vec> points;
  std::vector<ChordData> chords;
  std::vector<TangentFrame> frames;
  std::vector<double> angles;
  std::vector<PhasePoint> states;

  int dimension() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
  int bounces() const { return static_cast<int>(chords.size()); }
};

/// Phase point at x leaving at angle `angle` above the tangent plane, heading
/// along the tangential part of `direction`.
inline PhasePoint make_phase_point(const Surface& surface, const Vec& x, const Vec& direction, double angle) {
  const Vec n = inward_normal(surface, x);
  Vec u = project_onto_tangent(n, direction);
  const double norm = u.norm();
  if (!(norm > 1e-12)) throw std::invalid_argument("direction has no tangential component");
  u /= norm;
  return {x, std::cos(angle) * u, std::sin(angle)};
}

/// Phase point at x from a tangent velocity with |v| < 1.
inline PhasePoint phase_from_velocity(const Surface& surface, const Vec& x, const Vec& v) {
  const Vec n = inward_normal(surface, x);
  Vec tangent = project_onto_tangent(n, v);
  const double speed = tangent.norm();
  if (!(speed < 1.0)) throw std::invalid_argument("projected velocity must satisfy |v| < 1");
  return {x, tangent, std::sqrt((1.0 - speed) * (1.0 + speed))};
}

/// Elastic reflection of the travel direction `incoming` arriving at y.
inline Vec reflect(const Surface& surface, const Vec& y, const Vec& incoming) {
  const Vec n = inward_normal(surface, y);
  const double normal_part = incoming.dot(n);
  if (!(std::abs(normal_part) >= tolerance::kGrazing * incoming.norm())) {
    throw NearTangentRay("incoming direction is tangent to the surface");
  }
  if (normal_part > 0.0) throw std::invalid_argument("incoming direction does not arrive from inside");
  Vec out = incoming - 2.0 * normal_part * n;
  return out / out.norm();
}

/// One application of the billiard map T: (x, v) -> (y, w).
inline std::pair<PhasePoint, ChordData> billiard_step(const Surface& surface, const PhasePoint& p) {
  if (!(p.v_hat >= tolerance::kGrazing)) {
    throw NearTangentRay("reflection angle below the grazing cutoff (sin phi = " + std::to_string(p.v_hat) + ")");
  }
  const Vec n_x = inward_normal(surface, p.x);
  Vec z = p.v + p.v_hat * n_x;
  z /= z.norm();
  RayHit hit = intersect_ray(surface, p.x, z);

  ChordData chord;
  chord.x = p.x;
  chord.y = hit.y;
  chord.length = (hit.y - p.x).norm();
  if (!(chord.length > 0.0)) throw DegenerateChord("zero-length chord");
  const Vec u = (hit.y - p.x) / chord.length;
  const Vec n_y = inward_normal(surface, hit.y);
  chord.v_hat = u.dot(n_x);
  chord.v = u - chord.v_hat * n_x;
  chord.w_hat = -u.dot(n_y);
  chord.w = u + chord.w_hat * n_y;

  const Vec out = reflect(surface, hit.y, u);
  const double out_hat = out.dot(n_y);
  PhasePoint q{hit.y, out - out_hat * n_y, out_hat};
  return {q, chord};
}

/// Orbit segment with `n_bounces` chords starting from p.
inline OrbitSegment orbit(const Surface& surface, const PhasePoint& p, int n_bounces) {
  if (n_bounces < 1) throw std::invalid_argument("orbit needs at least one bounce");
  OrbitSegment seg;
  seg.points.reserve(n_bounces + 1);
  seg.points.push_back(p.x);
  seg.states.push_back(p);
  seg.frames.push_back(tangent_frame(surface, p.x));
  seg.angles.push_back(p.angle());
  PhasePoint current = p;
  for (int k = 0; k < n_bounces; ++k) {
    try {
      auto [next, chord] = billiard_step(surface, current);
      seg.chords.push_back(std::move(chord));
      seg.points.push_back(next.x);
      seg.frames.push_back(tangent_frame(surface, next.x));
      seg.angles.push_back(next.angle());
      if (k + 1 < n_bounces) seg.states.push_back(next);
      current = std::move(next);
    } catch (Error& e) {
      if (!e.index()) e.set_index(k);
      throw;
    }
  }
  return seg;
}

/// Phase point that retraces `segment` backwards from its last point.
inline PhasePoint reversed_end(const OrbitSegment& segment) {
  const ChordData& last = segment.chords.back();
  return {last.y, -last.w, last.w_hat};
}

/// CSV with header n,x1..xd,phi,chord_length; the last vertex has no outgoing chord (nan).
inline void write_orbit_csv(std::ostream& os, const OrbitSegment& segment) {
  const int d = segment.dimension();
  os << "n";
  for (int i = 1; i <= d; ++i) os << ",x" << i;
  os << ",phi,chord_length\n";
  const auto old_precision = os.precision(17);
  for (std::size_t k = 0; k < segment.points.size(); ++k) {
    os << k;
    for (int i = 0; i < d; ++i) os << ',' << segment.points[k][i];
    os << ',' << segment.angles[k] << ',';
    if (k < segment.chords.size()) {
      os << segment.chords[k].length;
    } else {
      os << "nan";
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace billiards
