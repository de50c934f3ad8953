#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "billiards/dynamics.hpp"

namespace billiards {

/// Second derivatives of the chord length L(x, y) in the tangent frames at x and y.
///
/// l11 acts on frame(x) coordinates, l22 on frame(y) coordinates, l12 maps
/// frame(y) coordinates to frame(x) coordinates and l21 the reverse.
struct ChordOperators {
  Mat l11;
  Mat l12;
  Mat l21;
  Mat l22;

  double min_singular_l12() const {
    Eigen::JacobiSVD<Mat> svd(l12);
    return svd.singularValues().minCoeff();
  }
};

inline ChordOperators chord_operators(const Surface& surface, const ChordData& chord, const TangentFrame& frame_x,
                                      const TangentFrame& frame_y) {
  if (!(chord.length >= 1e-9)) throw DegenerateChord("chord shorter than 1e-9");
  const Mat& ex = frame_x.vectors;
  const Mat& ey = frame_y.vectors;
  const int d = static_cast<int>(chord.x.size());
  const Mat id = Mat::Identity(d, d);
  const double inv_len = 1.0 / chord.length;

  const Mat sx = shape_matrix(surface, frame_x);
  const Mat sy = shape_matrix(surface, frame_y);
  const Vec vx = ex.transpose() * chord.v;
  const Vec wy = ey.transpose() * chord.w;

  ChordOperators ops;
  ops.l11 = (Mat::Identity(vx.size(), vx.size()) - vx * vx.transpose()) * inv_len - chord.v_hat * sx;
  ops.l22 = (Mat::Identity(wy.size(), wy.size()) - wy * wy.transpose()) * inv_len - chord.w_hat * sy;
  ops.l12 = ex.transpose() * (-id + chord.v * chord.w.transpose()) * ey * inv_len;
  ops.l21 = ey.transpose() * (-id + chord.w * chord.v.transpose()) * ex * inv_len;
  return ops;
}

inline std::vector<ChordOperators> chord_operators_along(const Surface& surface, const OrbitSegment& segment) {
  std::vector<ChordOperators> ops;
  ops.reserve(segment.chords.size());
  for (std::size_t k = 0; k < segment.chords.size(); ++k) {
    try {
      ops.push_back(chord_operators(surface, segment.chords[k], segment.frames[k], segment.frames[k + 1]));
    } catch (Error& e) {
      if (!e.index()) e.set_index(static_cast<int>(k));
      throw;
    }
  }
  return ops;
}

namespace detail {

struct OneBounceGeometry {
  double inv_length_sum = 0.0;
  Vec v;  // outgoing projected velocity at x0
  double v_hat = 0.0;
};

inline OneBounceGeometry one_bounce_geometry(const Surface& surface, const Vec& x_prev, const Vec& x0,
                                             const Vec& x1) {
  const double len_in = (x0 - x_prev).norm();
  const double len_out = (x1 - x0).norm();
  if (!(len_in >= 1e-9) || !(len_out >= 1e-9)) throw DegenerateChord("one-bounce segment has a degenerate chord");
  const Vec n = inward_normal(surface, x0);
  const Vec u_in = (x0 - x_prev) / len_in;
  const Vec u_out = (x1 - x0) / len_out;
  const Vec w_in = project_onto_tangent(n, u_in);
  const Vec v_out = project_onto_tangent(n, u_out);
  if ((w_in - v_out).norm() > 1e-8 || !(u_out.dot(n) > 0.0) || !(u_in.dot(n) < 0.0)) {
    throw NotAnOrbit("reflection law fails at the middle point");
  }
  return {1.0 / len_in + 1.0 / len_out, v_out, u_out.dot(n)};
}

}  // namespace detail

/// Second variation of L(x_prev, .) + L(., x1) at x0 in the direction xi:
/// (|xi|^2 - <v0,xi>^2)(1/L_- + 1/L_+) - 2 B(xi,xi) sin(phi_0).
inline double one_bounce_form(const Surface& surface, const Vec& x_prev, const Vec& x0, const Vec& x1, const Vec& xi) {
  const auto g = detail::one_bounce_geometry(surface, x_prev, x0, x1);
  const double along = g.v.dot(xi);
  return (xi.squaredNorm() - along * along) * g.inv_length_sum -
         2.0 * second_fundamental_form(surface, x0, xi, xi) * g.v_hat;
}

/// Extremes of the one-bounce form over unit vectors orthogonal to v0 and its
/// value on v0 / |v0|. At normal incidence every direction counts as transversal
/// and `longitudinal` is NaN.
struct OneBounceSplit {
  double transversal_min = 0.0;
  double transversal_max = 0.0;
  double longitudinal = std::numeric_limits<double>::quiet_NaN();
  double v_hat = 0.0;
  double inv_length_sum = 0.0;
};

inline OneBounceSplit one_bounce_split(const Surface& surface, const Vec& x_prev, const Vec& x0, const Vec& x1) {
  const auto g = detail::one_bounce_geometry(surface, x_prev, x0, x1);
  const TangentFrame frame = tangent_frame(surface, x0);
  const Vec v = frame.coords(g.v);
  const int m = static_cast<int>(v.size());
  const Mat q = (Mat::Identity(m, m) - v * v.transpose()) * g.inv_length_sum - 2.0 * g.v_hat * shape_matrix(surface, frame);

  OneBounceSplit out;
  out.v_hat = g.v_hat;
  out.inv_length_sum = g.inv_length_sum;
  Mat transversal_basis;
  const double speed = v.norm();
  if (speed < 1e-9) {
    transversal_basis = Mat::Identity(m, m);
  } else {
    const Vec along = v / speed;
    out.longitudinal = along.dot(q * along);
    // orthonormal complement of `along` from a full QR
    Eigen::HouseholderQR<Mat> qr(along);
    transversal_basis = Mat(qr.householderQ()).rightCols(m - 1);
  }
  if (transversal_basis.cols() == 0) {
    out.transversal_min = out.transversal_max = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(transversal_basis.transpose() * q * transversal_basis,
                                            Eigen::EigenvaluesOnly);
  out.transversal_min = solver.eigenvalues().minCoeff();
  out.transversal_max = solver.eigenvalues().maxCoeff();
  return out;
}

/// Block-tridiagonal matrix of the second variation of the chord-length sum over
/// the interior points x_1 .. x_{N-1} of a segment, outer points held fixed.
struct SecondVariationForm {
  OrbitSegment segment;
  std::vector<ChordOperators> operators;
  Mat matrix;
  int block_size = 0;

  int blocks() const { return block_size == 0 ? 0 : static_cast<int>(matrix.rows()) / block_size; }
  /// Block (i, j) in interior numbering; block 0 belongs to x_1.
  Mat block(int i, int j) const {
    return matrix.block(i * block_size, j * block_size, block_size, block_size);
  }
};

inline SecondVariationForm assemble_form(const Surface& surface, const OrbitSegment& segment) {
  if (segment.chords.size() < 2) {
    throw std::invalid_argument("second variation needs at least one interior vertex");
  }
  SecondVariationForm form;
  form.segment = segment;
  form.operators = chord_operators_along(surface, segment);
  const int m = segment.dimension() - 1;
  const int interior = static_cast<int>(segment.chords.size()) - 1;
  form.block_size = m;
  form.matrix = Mat::Zero(interior * m, interior * m);
  for (int i = 0; i < interior; ++i) {
    // interior vertex x_{i+1}: outgoing chord i+1, incoming chord i
    form.matrix.block(i * m, i * m, m, m) = form.operators[i + 1].l11 + form.operators[i].l22;
    if (i + 1 < interior) {
      form.matrix.block(i * m, (i + 1) * m, m, m) = form.operators[i + 1].l12;
      form.matrix.block((i + 1) * m, i * m, m, m) = form.operators[i + 1].l21;
    }
  }
  return form;
}

/// Quadratic form value for stacked frame coordinates (one block per interior vertex).
inline double form_value(const SecondVariationForm& form, const Vec& stacked) {
  return stacked.dot(form.matrix * stacked);
}

enum class Definiteness {
  NegativeDefinite,
  NegativeSemidefinite,
  Indefinite,
  PositiveSemidefinite,
  PositiveDefinite,
};

inline const char* to_string(Definiteness d) {
  switch (d) {
    case Definiteness::NegativeDefinite: return "negative-definite";
    case Definiteness::NegativeSemidefinite: return "negative-semidefinite";
    case Definiteness::Indefinite: return "indefinite";
    case Definiteness::PositiveSemidefinite: return "positive-semidefinite";
    case Definiteness::PositiveDefinite: return "positive-definite";
  }
  return "unknown";
}

/// True for the maximizing classes (negative definite or semidefinite).
inline bool is_nonpositive(Definiteness d) {
  return d == Definiteness::NegativeDefinite || d == Definiteness::NegativeSemidefinite;
}

struct DefinitenessReport {
  Vec eigenvalues;  // ascending
  Mat eigenvectors;
  Definiteness classification = Definiteness::Indefinite;
  std::vector<Vec> kernel_basis;
  double tolerance = 0.0;

  double min() const { return eigenvalues.minCoeff(); }
  double max() const { return eigenvalues.maxCoeff(); }
};

/// Default semidefiniteness tolerance: 1e-9 times the max-norm of the matrix.
inline double default_tolerance(const Mat& m) { return 1e-9 * m.cwiseAbs().maxCoeff(); }

/// Classifies a symmetric matrix. A negative `tol` selects the scale-aware default.
inline DefinitenessReport definiteness(const Mat& matrix, double tol = -1.0) {
  if (!matrix.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
  DefinitenessReport report;
  report.tolerance = tol < 0.0 ? default_tolerance(matrix) : tol;
  Eigen::SelfAdjointEigenSolver<Mat> solver(0.5 * (matrix + matrix.transpose()));
  report.eigenvalues = solver.eigenvalues();
  report.eigenvectors = solver.eigenvectors();
  const double t = report.tolerance;
  int negative = 0;
  int positive = 0;
  for (Eigen::Index i = 0; i < report.eigenvalues.size(); ++i) {
    const double lambda = report.eigenvalues[i];
    if (lambda < -t) {
      ++negative;
    } else if (lambda > t) {
      ++positive;
    } else {
      report.kernel_basis.push_back(report.eigenvectors.col(i));
    }
  }
  const auto size = static_cast<int>(report.eigenvalues.size());
  if (negative > 0 && positive > 0) {
    report.classification = Definiteness::Indefinite;
  } else if (negative == size) {
    report.classification = Definiteness::NegativeDefinite;
  } else if (positive == size) {
    report.classification = Definiteness::PositiveDefinite;
  } else if (positive == 0) {
    report.classification = Definiteness::NegativeSemidefinite;
  } else {
    report.classification = Definiteness::PositiveSemidefinite;
  }
  return report;
}

inline DefinitenessReport definiteness(const SecondVariationForm& form, double tol = -1.0) {
  return definiteness(form.matrix, tol);
}

/// Tangent vectors xi_0 .. xi_N (frame coordinates) along a segment and the
/// residual of the three-term Jacobi recurrence at every interior index.
struct JacobiField {
  std::vector<Vec> vectors;
  std::vector<double> residuals;  // residuals[k-1] belongs to interior index k
  bool exact = false;

  double max_residual() const {
    return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
  }
};

/// |(l22(x_{k-1},x_k) + l11(x_k,x_{k+1})) xi_k + l21(x_{k-1},x_k) xi_{k-1} + l12(x_k,x_{k+1}) xi_{k+1}|.
inline std::vector<double> jacobi_residuals(const std::vector<ChordOperators>& ops, const std::vector<Vec>& vectors) {
  std::vector<double> res;
  for (std::size_t k = 1; k + 1 < vectors.size(); ++k) {
    const Vec r = (ops[k - 1].l22 + ops[k].l11) * vectors[k] + ops[k - 1].l21 * vectors[k - 1] +
                  ops[k].l12 * vectors[k + 1];
    res.push_back(r.norm());
  }
  return res;
}

/// Jacobi field with a twist-condition check, flagged exact when all residuals < 1e-8.
inline JacobiField make_jacobi_field(const std::vector<ChordOperators>& ops, std::vector<Vec> vectors) {
  JacobiField field;
  field.vectors = std::move(vectors);
  field.residuals = jacobi_residuals(ops, field.vectors);
  field.exact = field.max_residual() < 1e-8;
  return field;
}

/// Forward solution of the Jacobi recurrence from (xi_0, xi_1) along the whole segment.
inline JacobiField jacobi_propagate(const Surface& surface, const OrbitSegment& segment, const Vec& xi_start,
                                    const Vec& xi_next) {
  const auto ops = chord_operators_along(surface, segment);
  const int m = segment.dimension() - 1;
  if (xi_start.size() != m || xi_next.size() != m) {
    throw std::invalid_argument("Jacobi initial data must be given in frame coordinates");
  }
  std::vector<Vec> xi{xi_start, xi_next};
  const std::size_t n_points = segment.points.size();
  for (std::size_t k = 1; k + 1 < n_points; ++k) {
    const Mat& l12 = ops[k].l12;
    Eigen::JacobiSVD<Mat> svd(l12);
    if (!(svd.singularValues().minCoeff() >= 1e-12)) {
      throw TwistFailure("mixed derivative is singular", static_cast<int>(k));
    }
    const Vec rhs = (ops[k - 1].l22 + ops[k].l11) * xi[k] + ops[k - 1].l21 * xi[k - 1];
    xi.push_back(-l12.fullPivLu().solve(rhs));
  }
  return make_jacobi_field(ops, std::move(xi));
}

/// Splits stacked interior coordinates into a Jacobi field with zero ends.
inline std::vector<Vec> pad_kernel_vector(const Vec& stacked, int block_size) {
  const int blocks = static_cast<int>(stacked.size()) / block_size;
  std::vector<Vec> out;
  out.push_back(Vec::Zero(block_size));
  for (int i = 0; i < blocks; ++i) out.push_back(stacked.segment(i * block_size, block_size));
  out.push_back(Vec::Zero(block_size));
  return out;
}

/// Phase point at x with |v| = speed along the unit tangent `direction`.
inline PhasePoint phase_at_speed(const Vec& x, const Vec& direction, double speed) {
  return {x, speed * direction, std::sqrt((1.0 - speed) * (1.0 + speed))};
}

/// Form of delta^2 Phi_{1,n} for the orbit leaving x with the given phase point.
inline SecondVariationForm form_from(const Surface& surface, const PhasePoint& start, int n) {
  return assemble_form(surface, orbit(surface, start, n + 1));
}

/// Number of strictly positive eigenvalues.
inline int positive_count(const Vec& eigenvalues) {
  return static_cast<int>((eigenvalues.array() > 0.0).count());
}

struct SearchInterval {
  double lo = 1e-3;   // in |v|
  double hi = 0.999;  // in |v|
};

struct ConjugateOptions {
  enum class Prefer { GrazingSide, NormalSide };
  /// Which crossing to refine when the coarse scan brackets several.
  Prefer prefer = Prefer::GrazingSide;
  /// Coarse scan nodes, uniform in v_hat over the interval.
  int coarse_nodes = 128;
  /// Bisection stops once the |v| bracket is shorter than this.
  double bracket_width = 1e-10;
  double kernel_window = 1e-6;
  double residual_window = 1e-6;
};

struct ConjugatePoint {
  PhasePoint phase;
  SecondVariationForm form;
  JacobiField field;
  double kernel_eigenvalue = 0.0;  // eigenvalue of smallest magnitude at the boundary
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int bisection_steps = 0;
  int crossings_found = 0;
  bool certified = false;
};

/// Locates a phase point along x + |v| * direction where delta^2 Phi_{1,n} has a
/// kernel and returns the kernel as a Jacobi field vanishing at x_0 and x_{n+1}.
///
/// A coarse scan records the inertia (number of positive eigenvalues) and the
/// selected change of inertia is refined by bisection on |v|.
inline std::optional<ConjugatePoint> detect_conjugate(const Surface& surface, const Vec& x, const Vec& direction,
                                                      int n, SearchInterval search = {},
                                                      const ConjugateOptions& options = {}) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  if (!(search.lo >= 0.0 && search.lo < search.hi && search.hi < 1.0)) {
    throw std::invalid_argument("search interval must satisfy 0 <= lo < hi < 1");
  }
  const Vec normal = inward_normal(surface, x);
  Vec dir = project_onto_tangent(normal, direction);
  if (!(dir.norm() > 1e-12)) throw std::invalid_argument("direction has no tangential component");
  dir /= dir.norm();

  auto inertia = [&](double speed) {
    const auto form = form_from(surface, phase_at_speed(x, dir, speed), n);
    Eigen::SelfAdjointEigenSolver<Mat> solver(form.matrix, Eigen::EigenvaluesOnly);
    return positive_count(solver.eigenvalues());
  };
  auto speed_of = [](double v_hat) { return std::sqrt(std::max(0.0, (1.0 - v_hat) * (1.0 + v_hat))); };

  const double hat_hi = std::sqrt((1.0 - search.lo) * (1.0 + search.lo));
  const double hat_lo = std::sqrt((1.0 - search.hi) * (1.0 + search.hi));
  const int nodes = std::max(options.coarse_nodes, 2);
  std::vector<double> speeds(nodes);
  std::vector<int> counts(nodes);
  for (int i = 0; i < nodes; ++i) {
    // i = 0 is the grazing end
    const double v_hat = hat_lo + (hat_hi - hat_lo) * i / (nodes - 1);
    speeds[i] = i == 0 ? search.hi : (i == nodes - 1 ? search.lo : speed_of(v_hat));
    counts[i] = inertia(speeds[i]);
  }
  std::vector<int> cells;
  for (int i = 0; i + 1 < nodes; ++i) {
    if (counts[i] != counts[i + 1]) cells.push_back(i);
  }
  if (cells.empty()) return std::nullopt;
  const int cell = options.prefer == ConjugateOptions::Prefer::GrazingSide ? cells.front() : cells.back();

  // speeds decrease with the node index
  double hi = speeds[cell];
  double lo = speeds[cell + 1];
  const int count_hi = counts[cell];
  int steps = 0;
  while (hi - lo > options.bracket_width && steps < 200) {
    const double mid = 0.5 * (lo + hi);
    if (inertia(mid) == count_hi) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++steps;
  }

  ConjugatePoint result;
  result.bracket_lo = lo;
  result.bracket_hi = hi;
  result.bisection_steps = steps;
  result.crossings_found = static_cast<int>(cells.size());
  result.phase = phase_at_speed(x, dir, 0.5 * (lo + hi));
  result.form = form_from(surface, result.phase, n);
  Eigen::SelfAdjointEigenSolver<Mat> solver(result.form.matrix);
  Eigen::Index idx = 0;
  solver.eigenvalues().cwiseAbs().minCoeff(&idx);
  result.kernel_eigenvalue = solver.eigenvalues()[idx];
  result.field = make_jacobi_field(result.form.operators,
                                   pad_kernel_vector(solver.eigenvectors().col(idx), result.form.block_size));
  result.certified = std::abs(result.kernel_eigenvalue) < options.kernel_window &&
                     result.field.max_residual() < options.residual_window;
  return result;
}

/// One grid point of the polar scan of the unit ball at x.
struct MaximizerSample {
  int direction_index = 0;
  Vec direction;  // ambient unit tangent
  double speed = 0.0;
  double v_hat = 1.0;
  bool resolved = true;
  Definiteness at_n = Definiteness::Indefinite;
  Definiteness at_next = Definiteness::Indefinite;
  double lambda_max_n = 0.0;
  double lambda_max_next = 0.0;
  double min_interior_v_hat_n = 1.0;
  double min_interior_v_hat_next = 1.0;
};

struct BoundaryPoint {
  int direction_index = 0;
  double speed = 0.0;
};

/// Polar sample of M_{x,n} (and M_{x,n+1}) on a direction x |v| grid.
struct MaximizerSetSample {
  Vec x;
  int n = 0;
  int directions = 0;
  int radial_grid = 0;
  std::vector<MaximizerSample> samples;
  std::vector<BoundaryPoint> boundary_points;
  /// sin(phi) floor 1 / (D K_max): any vertex of a maximizing segment sits above it.
  double grazing_floor = 0.0;
  int unresolved = 0;
  int nesting_violations = 0;         // NSD at n+1 but not at n
  int definite_nesting_violations = 0;  // ND at n+1 but not NSD at n
  int grazing_violations = 0;
};

/// Unit tangent directions used by the polar scan: angles 2 pi j / count in the
/// plane of the first two frame vectors (plus/minus e1 on curves).
inline std::vector<Vec> scan_directions(const TangentFrame& frame, int count) {
  std::vector<Vec> dirs;
  for (int j = 0; j < count; ++j) {
    if (frame.size() == 1) {
      dirs.push_back((j % 2 == 0 ? 1.0 : -1.0) * frame.vectors.col(0));
    } else {
      const double theta = 2.0 * std::numbers::pi * j / count;
      dirs.push_back(std::cos(theta) * frame.vectors.col(0) + std::sin(theta) * frame.vectors.col(1));
    }
  }
  return dirs;
}

inline OrbitSegment truncate(const OrbitSegment& seg, int bounces) {
  OrbitSegment out;
  out.points.assign(seg.points.begin(), seg.points.begin() + bounces + 1);
  out.chords.assign(seg.chords.begin(), seg.chords.begin() + bounces);
  out.frames.assign(seg.frames.begin(), seg.frames.begin() + bounces + 1);
  out.angles.assign(seg.angles.begin(), seg.angles.begin() + bounces + 1);
  out.states.assign(seg.states.begin(), seg.states.begin() + std::min<std::size_t>(bounces, seg.states.size()));
  return out;
}

inline MaximizerSetSample maximizer_set_sample(const Surface& surface, const Vec& x, int n, int directions,
                                               int radial_grid) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  if (directions < 2 || radial_grid < 2) throw std::invalid_argument("grids must have at least 2 points");
  MaximizerSetSample out;
  out.x = x;
  out.n = n;
  out.directions = directions;
  out.radial_grid = radial_grid;
  // curves (d = 2) have no transversal direction, hence no floor
  out.grazing_floor = surface.dimension() > 2 ? 1.0 / (surface.diameter_bound() * surface.max_curvature()) : 0.0;

  const TangentFrame frame = tangent_frame(surface, x);
  const auto dirs = scan_directions(frame, directions);
  auto min_interior_hat = [](const OrbitSegment& seg) {
    double m = 1.0;
    for (std::size_t k = 1; k + 1 < seg.points.size(); ++k) m = std::min(m, std::sin(seg.angles[k]));
    return m;
  };

  for (int j = 0; j < directions; ++j) {
    bool have_prev = false;
    bool prev_nsd = false;
    double prev_speed = 0.0;
    for (int i = 0; i < radial_grid; ++i) {
      MaximizerSample s;
      s.direction_index = j;
      s.direction = dirs[j];
      s.speed = static_cast<double>(i) / radial_grid;
      const PhasePoint start = phase_at_speed(x, dirs[j], s.speed);
      s.v_hat = start.v_hat;
      try {
        const OrbitSegment long_seg = orbit(surface, start, n + 2);
        const OrbitSegment short_seg = truncate(long_seg, n + 1);
        const auto rep_n = definiteness(assemble_form(surface, short_seg));
        const auto rep_next = definiteness(assemble_form(surface, long_seg));
        s.at_n = rep_n.classification;
        s.at_next = rep_next.classification;
        s.lambda_max_n = rep_n.max();
        s.lambda_max_next = rep_next.max();
        s.min_interior_v_hat_n = min_interior_hat(short_seg);
        s.min_interior_v_hat_next = min_interior_hat(long_seg);
      } catch (const NearTangentRay&) {
        s.resolved = false;
      }
      if (!s.resolved) {
        ++out.unresolved;
        have_prev = false;
        out.samples.push_back(std::move(s));
        continue;
      }
      const bool nsd = is_nonpositive(s.at_n);
      const bool nsd_next = is_nonpositive(s.at_next);
      if (nsd_next && !nsd) ++out.nesting_violations;
      if (s.at_next == Definiteness::NegativeDefinite && !nsd) ++out.definite_nesting_violations;
      if (nsd && s.min_interior_v_hat_n < out.grazing_floor) ++out.grazing_violations;
      if (nsd_next && s.min_interior_v_hat_next < out.grazing_floor) ++out.grazing_violations;
      if (have_prev && nsd != prev_nsd) out.boundary_points.push_back({j, 0.5 * (prev_speed + s.speed)});
      have_prev = true;
      prev_nsd = nsd;
      prev_speed = s.speed;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace billiards
