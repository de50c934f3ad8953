// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "billiards/billiards.hpp"
#include "oracles.hpp"

using namespace billiards;

namespace {

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double rel_error(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

// restriction to e2, the normal of the xz-plane orbit
Mat transversal_part(const SecondVariationForm& form) {
  const Mat q = detail::stacked_directions(form, std::vector<Vec>(form.blocks(), v3(0, 1, 0)));
  return q.transpose() * form.matrix * q;
}

OrbitSegment sphere_orbit(double alpha, int bounces) {
  const auto sphere = Surface::sphere(1.0);
  return orbit(sphere, make_phase_point(sphere, v3(0, 0, 1), v3(1, 0, 0), alpha), bounces);
}

Outcome sphere_closed_forms() {
  Outcome out;
  for (double alpha : {M_PI / 6, M_PI / 4, M_PI / 3}) {
    const auto report = sphere_report(alpha, 10);
    for (const auto* f : report.failures()) out.require(false, f->description);
  }
  return out;
}

Outcome sphere_dichotomy() {
  Outcome out;
  for (double alpha : {M_PI / 6, M_PI / 4, M_PI / 3, 0.4, 1.0, 1.3, M_PI / 2}) {
    const auto report = sphere_report(alpha, 20);
    for (const auto* f : report.failures()) out.require(false, f->description);
  }
  const auto check_kernel = [&](double alpha, const Vec& expected) {
    const auto form = assemble_form(Surface::sphere(1.0), sphere_orbit(alpha, 3));
    const auto rep = definiteness(transversal_part(form));
    out.require(rep.kernel_basis.size() == 1, "one-dimensional kernel at alpha " + std::to_string(alpha));
    if (rep.kernel_basis.size() == 1) {
      out.require(std::abs(std::abs(rep.kernel_basis[0].dot(expected)) - 1.0) < 1e-8, "kernel direction");
      out.require(std::abs(rep.eigenvalues.cwiseAbs().minCoeff()) < 1e-8, "zero eigenvalue");
    }
  };
  check_kernel(M_PI / 3, Vec(Eigen::Vector2d(1, -1) / std::sqrt(2.0)));
  check_kernel(M_PI / 6, Vec(Eigen::Vector2d(1, 1) / std::sqrt(2.0)));
  return out;
}

Outcome diameter_maximality() {
  Outcome out;
  const auto sphere = Surface::sphere(1.0);
  const auto seg = orbit(sphere, PhasePoint{v3(0, 0, 1), Vec::Zero(3), 1.0}, 21);
  for (int n = 1; n <= 20; ++n) {
    const auto rep = definiteness(assemble_form(sphere, truncate(seg, n + 1)));
    out.require(rep.classification == Definiteness::NegativeDefinite, "diameter form ND at n=" + std::to_string(n));
    out.require(rep.min() > -2.0 && rep.max() < 0.0, "eigenvalues in (-2, 0) at n=" + std::to_string(n));
  }
  return out;
}

Outcome operator_oracle() {
  Outcome out;
  std::mt19937_64 rng(kDefaultSeed);
  int count = 0;
  for (const auto& surface : {Surface::sphere(1.0), Surface::ellipsoid(v3(0.8, 1.0, 1.2))}) {
    for (int i = 0; i < 60; ++i, ++count) {
      const ChordData c = oracle::random_chord(surface, rng);
      const auto fx = tangent_frame(surface, c.x);
      const auto fy = tangent_frame(surface, c.y);
      const auto ops = chord_operators(surface, c, fx, fy);
      const auto fd = oracle::fd_chord_operators(surface, fx, fy, 1e-4);
      const double err = std::max({rel_error(ops.l11, fd.l11), rel_error(ops.l12, fd.l12), rel_error(ops.l21, fd.l21),
                                   rel_error(ops.l22, fd.l22)});
      out.require(err < 1e-5, "finite-difference error " + std::to_string(err));
      out.require((ops.l12.transpose() - ops.l21).cwiseAbs().maxCoeff() < 1e-10, "l12^T = l21");
    }
  }
  out.require(count >= 100, "at least 100 chords");
  return out;
}

Outcome form_oracle() {
  Outcome out;
  const auto surface = Surface::ellipsoid(v3(0.8, 1.0, 1.2));
  std::mt19937_64 rng(kDefaultSeed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> angle(0.3, 1.4);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 1 + trial % 5;
    const Vec x = surface.sample_point(rng);
    const auto frame = tangent_frame(surface, x);
    const Vec dir = frame.ambient(Vec(Eigen::Vector2d(gauss(rng), gauss(rng))));
    const auto seg = orbit(surface, make_phase_point(surface, x, dir, angle(rng)), n + 1);
    const auto form = assemble_form(surface, seg);
    Vec c(form.matrix.rows());
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = gauss(rng);
    const double q = form_value(form, c);
    const double fd = oracle::fd_second_variation(surface, seg, c, 1e-4);
    const double scale = std::max(std::abs(q), form.matrix.cwiseAbs().maxCoeff() * c.squaredNorm());
    out.require(std::abs(q - fd) / scale < 1e-4, "form value vs second difference, trial " + std::to_string(trial));
  }
  return out;
}

Outcome flat_point() {
  Outcome out;
  const auto report = ellipsoid_flat_point_check(0.3, 1.0, 1.2, 200);
  for (const auto* f : report.failures()) out.require(false, f->description);
  out.require(report.results["min_transversal"].get<double>() >= 0.23, "minimum transversal value >= 0.23");
  return out;
}

// first inertia change from the grazing end on a grid uniform in v_hat
double dense_crossing(const Surface& surface, const Vec& x, const Vec& dir, int n, int grid) {
  const SearchInterval s;
  const double hat_lo = std::sqrt(1.0 - s.hi * s.hi);
  const double hat_hi = std::sqrt(1.0 - s.lo * s.lo);
  int prev = -1;
  for (int i = 0; i < grid; ++i) {
    const double h = hat_lo + (hat_hi - hat_lo) * i / (grid - 1);
    const auto form = form_from(surface, phase_at_speed(x, dir, std::sqrt(1.0 - h * h)), n);
    const int pos = positive_count(definiteness(form).eigenvalues);
    if (prev >= 0 && pos != prev) return h;
    prev = pos;
  }
  return NAN;
}

Outcome conjugate_scanner() {
  Outcome out;
  const auto sphere = Surface::sphere(1.0);
  const auto cp = detect_conjugate(sphere, v3(0, 0, 1), v3(1, 0, 0), 2);
  out.require(cp.has_value(), "sphere conjugate point found");
  if (cp) {
    out.require(std::abs(cp->phase.v_hat - 0.5) < 1e-8, "sphere v_hat = 0.5");
    out.require(cp->field.vectors.front().norm() == 0.0 && cp->field.vectors.back().norm() == 0.0, "zero endpoints");
    out.require(cp->field.max_residual() < 1e-6, "sphere Jacobi residual");
  }
  const auto surface = Surface::ellipsoid(v3(0.8, 1.0, 1.2));
  const std::vector<Vec> points = {v3(0, 0, 1.2), v3(0, 1, 0), surface.radial_point(v3(0.3, -0.5, 0.8))};
  const std::vector<Vec> dirs = {v3(1, 0, 0), v3(1, 0, 0), v3(0.2, 1, 0.3)};
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vec t = project_onto_tangent(inward_normal(surface, points[p]), dirs[p]).normalized();
    for (int n = 2; n <= 6; ++n) {
      const std::string tag = "point " + std::to_string(p) + ", n=" + std::to_string(n);
      const auto found = detect_conjugate(surface, points[p], t, n);
      out.require(found.has_value(), "boundary point found at " + tag);
      if (!found) continue;
      out.require(found->certified, "kernel field certified at " + tag);
      const double dense = dense_crossing(surface, points[p], t, n, 2000);
      out.require(std::abs(dense - found->phase.v_hat) < 1e-3,
                  "dense grid agreement at " + tag + " (" + std::to_string(dense) + " vs " +
                      std::to_string(found->phase.v_hat) + ")");
    }
  }
  return out;
}

Outcome maximizing_sets() {
  Outcome out;
  const std::vector<Surface> surfaces = {Surface::sphere(1.0), Surface::ellipsoid(v3(0.8, 1.0, 1.2)),
                                         Surface::ellipsoid(v3(0.3, 1.0, 1.2))};
  const std::vector<Vec> directions = {v3(0, 0, 1), v3(0.1, 0.2, 1.0), v3(1, 0.4, -0.3)};
  for (const auto& surface : surfaces) {
    for (const auto& d : directions) {
      for (int n = 1; n <= 3; ++n) {
        const auto s = maximizer_set_sample(surface, surface.radial_point(d), n, 12, 32);
        out.require(s.nesting_violations == 0, "nesting M_{n+1} in M_n");
        out.require(s.definite_nesting_violations == 0, "definite points at n+1 are maximizing at n");
        out.require(s.grazing_violations == 0, "no maximizing sample below the grazing floor");
      }
    }
  }
  return out;
}

Outcome angle_threshold() {
  Outcome out;
  double previous_gap = INFINITY;
  for (int grid : {64, 128, 256}) {
    const auto report = angle_threshold_estimate(Surface::sphere(1.0), grid, 32);
    const double gap = std::abs(report.results["threshold"].get<double>() - M_PI / 4);
    out.require(gap <= report.results["grid_step"].get<double>(), "sphere threshold within one step at grid " +
                                                                       std::to_string(grid));
    out.require(gap <= previous_gap, "sphere gap shrinks as the grid doubles");
    previous_gap = gap;
  }
  for (const auto& surface : {Surface::ellipsoid(v3(0.8, 1.0, 1.2)), Surface::ellipsoid(v3(0.3, 1.0, 1.2)),
                              Surface::sphere(2.0)}) {
    const auto report = angle_threshold_estimate(surface, 64, 32);
    out.require(report.results["threshold"].get<double>() > 0.0, "positive threshold on " + surface.describe());
  }
  return out;
}

Outcome symmetric_lift() {
  Outcome out;
  const auto thin = symmetric_lift_check(1.5, 1.0, 0.2, 0.5, 30);
  for (const auto* f : thin.failures()) out.require(false, f->description);
  const auto form = assemble_form(Surface::ellipsoid(v3(1.5, 1.0, 0.2)), caustic_orbit(1.5, 1.0, 0.2, 0.5, 30));
  out.require(definiteness(form).classification == Definiteness::NegativeDefinite, "full form negative definite");
  const auto tall = symmetric_lift_check(1.5, 1.0, 5.0, 0.5, 30);
  for (const auto* f : tall.failures()) out.require(false, f->description);
  const auto tall_form = assemble_form(Surface::ellipsoid(v3(1.5, 1.0, 5.0)), caustic_orbit(1.5, 1.0, 5.0, 0.5, 30));
  out.require(!is_nonpositive(definiteness(tall_form).classification), "C = 5 form not negative semidefinite");
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds, <= 0 for none
  std::function<Outcome()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "sphere closed-form blocks", 1.0, sphere_closed_forms},
      {2, "sphere definiteness dichotomy", 0.0, sphere_dichotomy},
      {3, "diameter maximality", 0.0, diameter_maximality},
      {4, "chord operator finite-difference oracle", 5.0, operator_oracle},
      {5, "quadratic form finite-difference oracle", 0.0, form_oracle},
      {6, "flat point exclusion on the ellipsoid", 5.0, flat_point},
      {7, "conjugate point scanner", 30.0, conjugate_scanner},
      {8, "maximizing set structure", 0.0, maximizing_sets},
      {9, "angle threshold", 0.0, angle_threshold},
      {10, "symmetric lift", 10.0, symmetric_lift},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0.0 && secs > c.time_limit) out.require(false, "runtime over " + std::to_string(c.time_limit) + " s");
    std::printf("%s criterion %2d: %s (%.2f s)%s%s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                out.pass ? "" : " -- ", out.detail.c_str());
    if (!out.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
