#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "billiards/report.hpp"
#include "billiards/variation.hpp"

namespace billiards {

inline constexpr std::uint64_t kDefaultSeed = 42;

struct ExperimentContext {
  std::uint64_t seed = kDefaultSeed;
  /// When set, runners write their CSV artifacts here.
  std::optional<std::filesystem::path> output_dir;
};

/// Sampled curvature constants of a planar orbit lifted into a symmetric surface.
struct CurvatureBounds {
  double K1 = 0.0;  // max curvature along the planar curve
  double K2 = 0.0;  // min curvature orthogonal to the plane
  double C1 = 0.0;  // min sin(phi) along the orbit
};

namespace detail {

inline std::string write_orbit_artifact(const ExperimentContext& ctx, const std::string& file,
                                        const OrbitSegment& seg) {
  std::filesystem::create_directories(*ctx.output_dir);
  const auto path = *ctx.output_dir / file;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_orbit_csv(os, seg);
  return path.string();
}

/// Symmetric tridiagonal n x n matrix with diagonal a and off-diagonal b.
inline Mat tridiagonal(int n, double a, double b) {
  Mat m = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = a;
    if (i + 1 < n) m(i, i + 1) = m(i + 1, i) = b;
  }
  return m;
}

/// Stacks per-vertex ambient tangent vectors (interior vertices 1..N-1) into
/// frame coordinates, one column of the returned matrix per vertex.
inline Mat stacked_directions(const SecondVariationForm& form, const std::vector<Vec>& ambient) {
  const int m = form.block_size;
  const int blocks = form.blocks();
  Mat q = Mat::Zero(blocks * m, blocks);
  for (int i = 0; i < blocks; ++i) q.block(i * m, i, m, 1) = form.segment.frames[i + 1].coords(ambient[i]);
  return q;
}

/// Random unit tangent at x.
template <typename Rng>
Vec random_tangent(const TangentFrame& frame, Rng& rng) {
  std::normal_distribution<double> gauss;
  Vec c(frame.size());
  do {
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = gauss(rng);
  } while (c.norm() < 1e-12);
  return frame.ambient(c / c.norm());
}

struct OneBounceSegment {
  Vec x_prev;
  Vec x0;
  Vec x1;
};

/// One-reflection segment through x0 leaving at angle phi along the unit tangent u.
inline OneBounceSegment one_bounce_through(const Surface& surface, const Vec& x0, const Vec& u, double phi) {
  const Vec n = inward_normal(surface, x0);
  const Vec out = std::cos(phi) * u + std::sin(phi) * n;
  const Vec back = -std::cos(phi) * u + std::sin(phi) * n;
  return {intersect_ray(surface, x0, back).y, x0, intersect_ray(surface, x0, out).y};
}

}  // namespace detail

/// Unit-sphere orbits at a fixed reflection angle: compares the assembled
/// transversal and longitudinal blocks with their closed-form tridiagonal
/// matrices and tracks where the transversal block stops being maximizing.
inline ExperimentReport sphere_report(double alpha, int n_max, const ExperimentContext& ctx = {}) {
  if (!(alpha > 0.0 && alpha <= std::numbers::pi / 2)) throw std::invalid_argument("alpha must lie in (0, pi/2]");
  if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
  ExperimentReport report;
  report.name = "sphere";
  report.parameters = {{"alpha", alpha}, {"n_max", n_max}, {"seed", ctx.seed}};

  const Surface sphere = Surface::sphere(1.0, 3);
  const Vec x0 = Vec::Unit(3, 2);
  const Vec u = Vec::Unit(3, 0);
  const Vec plane_normal = x0.head<3>().cross(u.head<3>()).normalized();

  const double s = std::sin(alpha);
  const double a_t = std::cos(2.0 * alpha) / s;
  const double b_t = -1.0 / (2.0 * s);
  const double a_l = -s;
  const double b_l = s / 2.0;

  OrbitSegment longest = orbit(sphere, make_phase_point(sphere, x0, u, alpha), n_max + 1);
  std::optional<int> first_non_nsd;
  Json per_n = Json::array();
  for (int n = 1; n <= n_max; ++n) {
    const SecondVariationForm form = assemble_form(sphere, truncate(longest, n + 1));
    std::vector<Vec> transversal;
    std::vector<Vec> longitudinal;
    for (int k = 1; k <= n; ++k) {
      const Vec xk = form.segment.points[k];
      transversal.push_back(plane_normal);
      longitudinal.push_back(Vec(plane_normal.head<3>().cross(xk.head<3>()).normalized()));
    }
    const Mat qt = detail::stacked_directions(form, transversal);
    const Mat ql = detail::stacked_directions(form, longitudinal);
    const Mat t_block = qt.transpose() * form.matrix * qt;
    const Mat l_block = ql.transpose() * form.matrix * ql;
    const Mat mixed = qt.transpose() * form.matrix * ql;
    const std::string tag = "n=" + std::to_string(n) + ": ";

    const double t_err = (t_block - detail::tridiagonal(n, a_t, b_t)).cwiseAbs().maxCoeff();
    const double l_err = (l_block - detail::tridiagonal(n, a_l, b_l)).cwiseAbs().maxCoeff();
    report.add(tag + "transversal block matches tridiagonal(cos2a/sina, -1/(2 sina))", 0.0, t_err, 1e-8,
               t_err <= 1e-8);
    report.add(tag + "longitudinal block matches tridiagonal(-sina, sina/2)", 0.0, l_err, 1e-8, l_err <= 1e-8);
    const double mixed_max = mixed.cwiseAbs().maxCoeff();
    report.add(tag + "transversal/longitudinal coupling vanishes", 0.0, mixed_max, 1e-8, mixed_max <= 1e-8);

    const auto t_rep = definiteness(t_block);
    const auto l_rep = definiteness(l_block);
    report.add(tag + "longitudinal block negative definite", "negative-definite", to_string(l_rep.classification), 0.0,
               l_rep.classification == Definiteness::NegativeDefinite);

    std::vector<double> analytic;
    for (int k = 1; k <= n; ++k) analytic.push_back(a_t + 2.0 * b_t * std::cos(k * std::numbers::pi / (n + 1)));
    std::sort(analytic.begin(), analytic.end());
    double eig_err = 0.0;
    for (int k = 0; k < n; ++k) eig_err = std::max(eig_err, std::abs(analytic[k] - t_rep.eigenvalues[k]));
    report.add(tag + "transversal eigenvalues equal a + 2b cos(k pi/(n+1))", 0.0, eig_err, 1e-8, eig_err <= 1e-8);

    const bool predicted_nonneg = std::cos(std::numbers::pi / (n + 1)) + std::cos(2.0 * alpha) >= -1e-12;
    const bool observed_nonneg = t_rep.max() > -1e-9;
    report.add(tag + "nonnegative transversal eigenvalue iff cos(pi/(n+1)) >= -cos 2a", predicted_nonneg,
               observed_nonneg, 1e-9, predicted_nonneg == observed_nonneg);

    const auto full = definiteness(form);
    if (!first_non_nsd && !is_nonpositive(t_rep.classification)) first_non_nsd = n;
    per_n.push_back({{"n", n},
                     {"transversal_eigenvalues", to_json(Vec(t_rep.eigenvalues))},
                     {"longitudinal_eigenvalues", to_json(Vec(l_rep.eigenvalues))},
                     {"transversal", to_string(t_rep.classification)},
                     {"longitudinal", to_string(l_rep.classification)},
                     {"full", to_string(full.classification)}});
  }
  report.results["a_transversal"] = a_t;
  report.results["b_transversal"] = b_t;
  report.results["a_longitudinal"] = a_l;
  report.results["b_longitudinal"] = b_l;
  report.results["first_n_not_negative_semidefinite"] = first_non_nsd ? Json(*first_non_nsd) : Json(nullptr);
  report.results["forms"] = std::move(per_n);
  if (ctx.output_dir) report.artifacts.push_back(detail::write_orbit_artifact(ctx, "sphere_orbit.csv", longest));
  return report;
}

/// Point A = (a1, 0, 0) on the shortest axis of a flat ellipsoid: every
/// one-bounce segment through A has a positive transversal second variation.
inline ExperimentReport ellipsoid_flat_point_check(double a1, double a2, double a3, int samples,
                                                   const ExperimentContext& ctx = {}) {
  if (!(a1 > 0.0 && a1 <= a2 && a2 <= a3)) throw std::invalid_argument("semi-axes must satisfy 0 < a1 <= a2 <= a3");
  if (!(2.0 * a1 * a3 < a2 * a2)) {
    throw std::invalid_argument("hypothesis 2 a1 a3 < a2^2 violated (" + std::to_string(2.0 * a1 * a3) +
                                " >= " + std::to_string(a2 * a2) + ")");
  }
  if (samples < 1) throw std::invalid_argument("samples must be positive");
  ExperimentReport report;
  report.name = "ellipsoid_flat";
  report.parameters = {{"a1", a1}, {"a2", a2}, {"a3", a3}, {"samples", samples}, {"seed", ctx.seed}};

  const Surface surface = Surface::ellipsoid((Vec(3) << a1, a2, a3).finished());
  const Vec A = Vec::Unit(3, 0) * a1;
  const double diameter = surface.diameter_bound();
  const Vec curvatures = principal_curvatures(surface, A);
  const double k_max = curvatures.maxCoeff();
  report.add_near("principal curvature a1/a2^2 at A", a1 / (a2 * a2), curvatures.maxCoeff(), 1e-10);
  report.add_near("principal curvature a1/a3^2 at A", a1 / (a3 * a3), curvatures.minCoeff(), 1e-10);
  report.add_near("diameter 2 a3", 2.0 * a3, diameter, 0.0);
  report.add("k_max < 1/D at A", 1.0 / diameter, k_max, 0.0, k_max < 1.0 / diameter);

  std::mt19937_64 rng(ctx.seed);
  std::uniform_real_distribution<double> angle_dist(1e-3, std::numbers::pi / 2);
  const TangentFrame frame = tangent_frame(surface, A);
  double min_value = std::numeric_limits<double>::infinity();
  double min_margin = std::numeric_limits<double>::infinity();
  int below_bound = 0;
  int nonpositive = 0;
  for (int i = 0; i < samples; ++i) {
    const double phi = angle_dist(rng);
    const Vec u = detail::random_tangent(frame, rng);
    const auto seg = detail::one_bounce_through(surface, A, u, phi);
    const auto split = one_bounce_split(surface, seg.x_prev, seg.x0, seg.x1);
    const double bound = 2.0 / diameter - 2.0 * k_max * split.v_hat;
    min_value = std::min(min_value, split.transversal_min);
    min_margin = std::min(min_margin, split.transversal_min - bound);
    if (split.transversal_min < bound - 1e-12) ++below_bound;
    if (!(split.transversal_min > 0.0)) ++nonpositive;
  }
  const double global_bound = 2.0 / diameter - 2.0 * k_max;
  report.add("every sample admits a positive transversal direction", 0, nonpositive, 0.0, nonpositive == 0);
  report.add("transversal value >= 2/D - 2 k_max sin(phi0) per sample", 0, below_bound, 1e-12, below_bound == 0);
  report.add("bound 2/D - 2 k_max is positive", "> 0", global_bound, 0.0, global_bound > 0.0);
  report.add("minimum transversal value >= 2/D - 2 k_max", global_bound, min_value, 1e-12,
             min_value >= global_bound - 1e-12);
  report.add("minimum transversal value exceeds 0.2", 0.2, min_value, 0.0, min_value > 0.2);
  report.results["curvatures"] = to_json(curvatures);
  report.results["diameter"] = diameter;
  report.results["bound"] = global_bound;
  report.results["min_transversal"] = min_value;
  report.results["min_margin_over_sample_bound"] = min_margin;
  return report;
}

/// Empirical angle below which every sampled one-bounce segment is positive on
/// transversal and negative on longitudinal variations.
inline ExperimentReport angle_threshold_estimate(const Surface& surface, int angle_grid, int point_samples,
                                                 const ExperimentContext& ctx = {}, int directions_per_point = 4) {
  if (angle_grid < 8 || point_samples < 8) throw std::invalid_argument("grids must have at least 8 points");
  if (surface.dimension() < 3) throw std::invalid_argument("transversal variations need dimension >= 3");
  ExperimentReport report;
  report.name = "angle_threshold";
  report.parameters = {{"surface", surface_to_json(surface)},
                       {"angle_grid", angle_grid},
                       {"point_samples", point_samples},
                       {"directions_per_point", directions_per_point},
                       {"seed", ctx.seed}};

  const double step = (std::numbers::pi / 2) / angle_grid;
  std::vector<bool> holds(angle_grid, true);
  std::vector<double> worst_transversal(angle_grid, std::numeric_limits<double>::infinity());
  std::vector<double> worst_longitudinal(angle_grid, -std::numeric_limits<double>::infinity());
  std::mt19937_64 rng(ctx.seed);
  int unresolved = 0;
  for (int p = 0; p < point_samples; ++p) {
    const Vec x0 = surface.sample_point(rng);
    const TangentFrame frame = tangent_frame(surface, x0);
    for (int q = 0; q < directions_per_point; ++q) {
      const Vec u = detail::random_tangent(frame, rng);
      for (int j = 0; j < angle_grid; ++j) {
        // half-step offset keeps grid angles off exact sign changes
        const double phi = (j + 0.5) * step;
        try {
          const auto seg = detail::one_bounce_through(surface, x0, u, phi);
          const auto split = one_bounce_split(surface, seg.x_prev, seg.x0, seg.x1);
          worst_transversal[j] = std::min(worst_transversal[j], split.transversal_min);
          worst_longitudinal[j] = std::max(worst_longitudinal[j], split.longitudinal);
          if (!(split.transversal_min > 0.0 && split.longitudinal < 0.0)) holds[j] = false;
        } catch (const NearTangentRay&) {
          ++unresolved;
          holds[j] = false;
        }
      }
    }
  }
  int last = -1;
  while (last + 1 < angle_grid && holds[last + 1]) ++last;
  const double threshold = last < 0 ? 0.0 : (last + 0.5) * step;

  report.add("threshold strictly positive", "> 0", threshold, 0.0, threshold > 0.0);
  if (std::holds_alternative<Sphere>(surface.kind())) {
    report.add_near("sphere threshold within one grid step of pi/4", std::numbers::pi / 4, threshold, step);
  }
  report.results["threshold"] = threshold;
  report.results["grid_step"] = step;
  report.results["unresolved"] = unresolved;
  Json profile = Json::array();
  for (int j = 0; j < angle_grid; ++j) {
    profile.push_back({{"phi", (j + 0.5) * step},
                       {"holds", static_cast<bool>(holds[j])},
                       {"min_transversal", worst_transversal[j]},
                       {"max_longitudinal", worst_longitudinal[j]}});
  }
  report.results["profile"] = std::move(profile);
  return report;
}

/// Planar orbit of the ellipse (A, B) tangent to the confocal caustic with
/// parameter lambda, lifted to the equator of the ellipsoid (A, B, C).
inline OrbitSegment caustic_orbit(double A, double B, double C, double lambda, int n_bounces,
                                  double tangency_parameter = 0.3) {
  const Surface surface = Surface::ellipsoid((Vec(3) << A, B, C).finished());
  const double ac = std::sqrt(A * A - lambda);
  const double bc = std::sqrt(B * B - lambda);
  const Eigen::Vector2d p(ac * std::cos(tangency_parameter), bc * std::sin(tangency_parameter));
  const Eigen::Vector2d t = Eigen::Vector2d(-ac * std::sin(tangency_parameter), bc * std::cos(tangency_parameter))
                                .normalized();
  // ((p + s t) / (A, B))^2 = 1
  const double qa = std::pow(t.x() / A, 2) + std::pow(t.y() / B, 2);
  const double qb = 2.0 * (p.x() * t.x() / (A * A) + p.y() * t.y() / (B * B));
  const double qc = std::pow(p.x() / A, 2) + std::pow(p.y() / B, 2) - 1.0;
  const double s_back = (-qb - std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
  Vec x0(3);
  x0 << p.x() + s_back * t.x(), p.y() + s_back * t.y(), 0.0;
  // land exactly on the surface before the first step
  x0 = surface.radial_point(x0);
  Vec dir(3);
  dir << t.x(), t.y(), 0.0;
  const auto split = project_tangent(surface, x0, dir);
  return orbit(surface, PhasePoint{x0, split.v, split.v_hat}, n_bounces);
}

/// Symmetric lift of a caustic-tangent ellipse orbit into the ellipsoid
/// (A, B, C): the planar/transverse coupling vanishes, the planar block is
/// maximizing, and the transverse block is governed by the curvature across
/// the plane.
inline ExperimentReport symmetric_lift_check(double A, double B, double C, double lambda, int n_bounces,
                                             const ExperimentContext& ctx = {}) {
  if (!(A > 0.0 && B > 0.0 && C > 0.0)) throw std::invalid_argument("semi-axes must be positive");
  if (!(lambda > 0.0 && lambda < std::min(A, B) * std::min(A, B))) {
    throw std::invalid_argument("caustic parameter must lie in (0, min(A,B)^2)");
  }
  if (n_bounces < 3) throw std::invalid_argument("n_bounces must be at least 3");
  ExperimentReport report;
  report.name = "symmetric_lift";
  report.parameters = {{"A", A}, {"B", B}, {"C", C}, {"lambda", lambda}, {"n_bounces", n_bounces}, {"seed", ctx.seed}};

  const Surface surface = Surface::ellipsoid((Vec(3) << A, B, C).finished());
  const OrbitSegment seg = caustic_orbit(A, B, C, lambda, n_bounces);
  const Vec e3 = Vec::Unit(3, 2);

  // every chord stays tangent to the caustic: min of the caustic quadric along the chord line is 0
  const double ac2 = A * A - lambda;
  const double bc2 = B * B - lambda;
  double tangency = 0.0;
  double plane = 0.0;
  for (const auto& c : seg.chords) {
    const Vec u = (c.y - c.x) / c.length;
    const double qa = u[0] * u[0] / ac2 + u[1] * u[1] / bc2;
    const double qb = 2.0 * (c.x[0] * u[0] / ac2 + c.x[1] * u[1] / bc2);
    const double qc = c.x[0] * c.x[0] / ac2 + c.x[1] * c.x[1] / bc2 - 1.0;
    tangency = std::max(tangency, std::abs(qc - qb * qb / (4.0 * qa)));
    plane = std::max(plane, std::abs(c.y[2]));
  }
  report.add("orbit stays in the plane of the ellipse", 0.0, plane, 1e-12, plane <= 1e-12);
  report.add("every chord is tangent to the confocal caustic", 0.0, tangency, 1e-8, tangency <= 1e-8);

  const SecondVariationForm form = assemble_form(surface, seg);
  const int blocks = form.blocks();
  std::vector<Vec> planar;
  std::vector<Vec> transverse;
  for (int i = 0; i < blocks; ++i) {
    const Vec n = inward_normal(surface, form.segment.points[i + 1]);
    planar.push_back(Vec(e3.head<3>().cross(n.head<3>()).normalized()));
    transverse.push_back(e3);
  }
  const Mat qp = detail::stacked_directions(form, planar);
  const Mat qt = detail::stacked_directions(form, transverse);
  const Mat planar_block = qp.transpose() * form.matrix * qp;
  const Mat transverse_block = qt.transpose() * form.matrix * qt;
  const double mixed = (qp.transpose() * form.matrix * qt).cwiseAbs().maxCoeff();
  report.add("planar/transverse mixed block vanishes", 0.0, mixed, 1e-8, mixed < 1e-8);

  const auto planar_rep = definiteness(planar_block);
  report.add("planar block negative definite (caustic orbit is maximizing)", "negative-definite",
             to_string(planar_rep.classification), 0.0, planar_rep.classification == Definiteness::NegativeDefinite);

  // sampled curvature constants
  CurvatureBounds bounds;
  bounds.K1 = 0.0;
  bounds.K2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 512; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 512;
    Vec x(3);
    x << A * std::cos(t), B * std::sin(t), 0.0;
    const Vec n = inward_normal(surface, x);
    const Vec tau = e3.head<3>().cross(n.head<3>()).normalized();
    bounds.K1 = std::max(bounds.K1, second_fundamental_form(surface, x, tau, tau));
    bounds.K2 = std::min(bounds.K2, second_fundamental_form(surface, x, e3, e3));
  }
  bounds.C1 = 1.0;
  for (double phi : seg.angles) bounds.C1 = std::min(bounds.C1, std::sin(phi));

  // Transverse entries: a_n = 1/L_- + 1/L_+ - 2 k2(x_n) sin(phi_n), |b_n| = 1/L(x_n, x_{n+1})
  double diag_err = 0.0;
  double off_err = 0.0;
  double chord_bound_violation = 0.0;
  bool all_diag_positive = true;
  for (int i = 0; i < blocks; ++i) {
    const int k = i + 1;
    const Vec& xk = form.segment.points[k];
    const double a_n = 1.0 / seg.chords[k - 1].length + 1.0 / seg.chords[k].length -
                       2.0 * second_fundamental_form(surface, xk, e3, e3) * std::sin(seg.angles[k]);
    diag_err = std::max(diag_err, std::abs(transverse_block(i, i) - a_n));
    if (!(transverse_block(i, i) > 0.0)) all_diag_positive = false;
    if (i + 1 < blocks) off_err = std::max(off_err, std::abs(std::abs(transverse_block(i, i + 1)) - 1.0 / seg.chords[k].length));
  }
  for (std::size_t k = 0; k < seg.chords.size(); ++k) {
    chord_bound_violation =
        std::max(chord_bound_violation, 2.0 * std::sin(seg.angles[k]) / bounds.K1 - seg.chords[k].length);
  }
  report.add("transverse diagonal a_n = 1/L- + 1/L+ - 2 k2 sin(phi)", 0.0, diag_err, 1e-10, diag_err <= 1e-10);
  report.add("transverse off-diagonal |b_n| = 1/L", 0.0, off_err, 1e-10, off_err <= 1e-10);
  report.add("chords exceed 2 sin(phi_n)/K1", "<= 0", chord_bound_violation, 1e-12, chord_bound_violation <= 1e-12);

  const double a_bound = bounds.K1 / bounds.C1 - 2.0 * bounds.K2;
  const double b_bound = bounds.K1 / (2.0 * bounds.C1);
  const bool dominance = a_bound < 0.0 && -a_bound > 2.0 * b_bound;
  const auto transverse_rep = definiteness(transverse_block);
  const auto full_rep = definiteness(form);
  if (dominance) {
    report.add("dominance a < 0, -a > 2b implies transverse block negative definite", "negative-definite",
               to_string(transverse_rep.classification), 0.0,
               transverse_rep.classification == Definiteness::NegativeDefinite);
    report.add("full form negative definite", "negative-definite", to_string(full_rep.classification), 0.0,
               full_rep.classification == Definiteness::NegativeDefinite);
  }
  if (all_diag_positive) {
    report.add("positive transverse diagonal implies form not negative semidefinite", "not negative-semidefinite",
               to_string(full_rep.classification), 0.0, !is_nonpositive(full_rep.classification));
  }

  report.results["K1"] = bounds.K1;
  report.results["K2"] = bounds.K2;
  report.results["C1"] = bounds.C1;
  report.results["a_bound"] = a_bound;
  report.results["b_bound"] = b_bound;
  report.results["dominance"] = dominance;
  report.results["transverse_diagonal_all_positive"] = all_diag_positive;
  report.results["mixed_max"] = mixed;
  report.results["planar_eigen_range"] = {planar_rep.min(), planar_rep.max()};
  report.results["transverse_eigen_range"] = {transverse_rep.min(), transverse_rep.max()};
  report.results["full_eigen_range"] = {full_rep.min(), full_rep.max()};
  report.results["full_classification"] = to_string(full_rep.classification);
  if (ctx.output_dir) report.artifacts.push_back(detail::write_orbit_artifact(ctx, "symmetric_lift_orbit.csv", seg));
  return report;
}

}  // namespace billiards
