#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "billiards/report.hpp"
#include "billiards/surface.hpp"

using namespace billiards;

namespace {

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

Surface flat_ellipsoid() { return Surface::ellipsoid(v3(0.3, 1.0, 1.2)); }

/// |x|^2 + c sum x_i^4 - 1: positive-definite Hessian, so strictly convex level set inside the unit ball.
Surface quartic(double c = 0.5) {
  GenericImplicit g;
  g.dimension = 3;
  g.value = [c](const Vec& x) { return x.squaredNorm() + c * x.array().pow(4).sum() - 1.0; };
  g.gradient = [c](const Vec& x) { return Vec(2.0 * x.array() + 4.0 * c * x.array().cube()); };
  g.hessian = [c](const Vec& x) { return Mat((2.0 + 12.0 * c * x.array().square()).matrix().asDiagonal()); };
  g.diameter_bound = 2.0;
  g.label = "quartic";
  return Surface::implicit(g);
}

}  // namespace

TEST(SurfaceEval, SignConvention) {
  const auto sphere = Surface::sphere(1.0);
  EXPECT_DOUBLE_EQ(eval(sphere, v3(1, 0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(eval(sphere, v3(0, 0, 0)), -1.0);
  EXPECT_GT(eval(sphere, v3(2, 0, 0)), 0.0);
  EXPECT_NEAR(eval(flat_ellipsoid(), v3(0.3, 0, 0)), 0.0, 1e-15);
}

TEST(SurfaceConstruction, DiameterBoundAndValidation) {
  EXPECT_DOUBLE_EQ(Surface::sphere(1.5).diameter_bound(), 3.0);
  EXPECT_DOUBLE_EQ(flat_ellipsoid().diameter_bound(), 2.4);
  EXPECT_THROW(Surface::sphere(-1.0), std::invalid_argument);
  EXPECT_THROW(Surface::ellipsoid(v2(1.0, 0.0)), std::invalid_argument);
  GenericImplicit missing;
  EXPECT_THROW(Surface::implicit(missing), std::invalid_argument);
}

TEST(InwardNormal, AxisPoints) {
  const auto sphere = Surface::sphere(1.0);
  EXPECT_TRUE(inward_normal(sphere, v3(1, 0, 0)).isApprox(v3(-1, 0, 0)));
  EXPECT_TRUE(inward_normal(sphere, v3(0, 0, 1)).isApprox(v3(0, 0, -1)));
  EXPECT_TRUE(inward_normal(flat_ellipsoid(), v3(0.3, 0, 0)).isApprox(v3(-1, 0, 0)));
}

TEST(InwardNormal, RejectsPointsOffTheSurface) {
  EXPECT_THROW(inward_normal(Surface::sphere(1.0), v3(0.5, 0, 0)), std::invalid_argument);
  EXPECT_THROW(inward_normal(Surface::sphere(1.0), v2(1.0, 0.0)), std::invalid_argument);
}

TEST(ProjectTangent, Examples) {
  const auto sphere = Surface::sphere(1.0);
  const double r = std::sqrt(0.5);
  auto split = project_tangent(sphere, v3(1, 0, 0), v3(-r, r, 0));
  EXPECT_NEAR((split.v - v3(0, r, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(split.v_hat, r, 1e-15);

  split = project_tangent(sphere, v3(1, 0, 0), v3(-1, 0, 0));
  EXPECT_NEAR(split.v.norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(split.v_hat, 1.0);

  split = project_tangent(sphere, v3(1, 0, 0), v3(0, 0, 1));
  EXPECT_TRUE(split.v.isApprox(v3(0, 0, 1)));
  EXPECT_DOUBLE_EQ(split.v_hat, 0.0);

  EXPECT_THROW(project_tangent(sphere, v3(1, 0, 0), v3(1, 0, 0)), std::invalid_argument);
}

TEST(ProjectTangent, ReconstructionProperty) {
  const auto surface = Surface::ellipsoid(v3(0.8, 1.0, 1.2));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 200; ++i) {
    const Vec x = surface.sample_point(rng);
    const Vec n = inward_normal(surface, x);
    Vec z = v3(gauss(rng), gauss(rng), gauss(rng));
    if (z.dot(n) < 0.0) z -= 2.0 * z.dot(n) * n;
    z /= z.norm();
    const auto split = project_tangent(surface, x, z);
    EXPECT_LT((split.v + split.v_hat * n - z).norm(), 1e-12);
    EXPECT_NEAR(split.v.squaredNorm() + split.v_hat * split.v_hat, 1.0, 1e-12);
  }
}

TEST(TangentFrame, NorthPole) {
  const auto frame = tangent_frame(Surface::sphere(1.0), v3(0, 0, 1));
  ASSERT_EQ(frame.size(), 2);
  EXPECT_TRUE(Vec(frame.vectors.col(0)).isApprox(v3(1, 0, 0)));
  EXPECT_TRUE(Vec(frame.vectors.col(1)).isApprox(v3(0, 1, 0)));
}

TEST(TangentFrame, OrthonormalAndDeterministic) {
  const std::vector<Surface> surfaces = {Surface::sphere(2.0), Surface::ellipsoid(v3(0.8, 1.0, 1.2)), quartic(),
                                         Surface::sphere(1.0, 5)};
  std::mt19937_64 rng(3);
  for (const auto& surface : surfaces) {
    for (int i = 0; i < 100; ++i) {
      const Vec x = surface.sample_point(rng);
      const auto frame = tangent_frame(surface, x);
      const Vec n = inward_normal(surface, x);
      const Mat gram = frame.vectors.transpose() * frame.vectors;
      const int m = frame.size();
      EXPECT_LT((gram - Mat::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((frame.vectors.transpose() * n).cwiseAbs().maxCoeff(), 1e-12);
      const auto again = tangent_frame(surface, x);
      EXPECT_TRUE(again.vectors == frame.vectors);
    }
  }
}

TEST(TangentFrame, StableUnderSmallPerturbation) {
  const auto surface = Surface::ellipsoid(v3(0.8, 1.0, 1.2));
  const Vec x = surface.radial_point(v3(0.3, -0.5, 0.8));
  const Vec nudged = surface.radial_point(x + v3(1e-9, -1e-9, 0.0));
  const auto a = tangent_frame(surface, x);
  const auto b = tangent_frame(surface, nudged);
  EXPECT_LT((a.vectors - b.vectors).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(ShapeOperator, SphereIsUmbilic) {
  const auto sphere = Surface::sphere(2.5);
  const Vec x = v3(0, 2.5, 0);
  const Vec xi = v3(0.3, 0, -0.7);
  EXPECT_LT((shape_operator(sphere, x, xi) - xi / 2.5).norm(), 1e-15);
}

TEST(ShapeOperator, FlatEllipsoidPrincipalCurvatures) {
  const auto e = flat_ellipsoid();
  const Vec a = v3(0.3, 0, 0);
  EXPECT_LT((shape_operator(e, a, v3(0, 1, 0)) - 0.3 * v3(0, 1, 0)).norm(), 1e-10);
  EXPECT_LT((shape_operator(e, a, v3(0, 0, 1)) - (0.3 / 1.44) * v3(0, 0, 1)).norm(), 1e-10);
  const Vec k = principal_curvatures(e, a);
  EXPECT_NEAR(k[0], 0.3 / 1.44, 1e-10);
  EXPECT_NEAR(k[1], 0.3, 1e-10);
}

TEST(ShapeOperator, ConvexAndSelfAdjointOnRandomSurfaces) {
  const std::vector<Surface> surfaces = {Surface::ellipsoid(v3(0.5, 0.9, 1.7)), quartic(0.8)};
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (const auto& surface : surfaces) {
    for (int i = 0; i < 200; ++i) {
      const Vec x = surface.sample_point(rng);
      const auto frame = tangent_frame(surface, x);
      const Vec xi = frame.ambient(Vec(Eigen::Vector2d(gauss(rng), gauss(rng))));
      const Vec eta = frame.ambient(Vec(Eigen::Vector2d(gauss(rng), gauss(rng))));
      const Vec s_xi = shape_operator(surface, x, xi);
      EXPECT_GT(s_xi.dot(xi), 0.0);
      EXPECT_LT(std::abs(s_xi.dot(inward_normal(surface, x))), 1e-12);
      EXPECT_LT(std::abs(s_xi.dot(eta) - xi.dot(shape_operator(surface, x, eta))), 1e-10);
    }
  }
}

TEST(MaxCurvature, EllipsoidBound) {
  const auto e = Surface::ellipsoid(v3(0.8, 1.0, 1.2));
  EXPECT_NEAR(e.max_curvature(), 1.2 / 0.64, 1e-15);
  EXPECT_DOUBLE_EQ(Surface::sphere(2.0).max_curvature(), 0.5);
  // sampled bound dominates the curvature at a few points
  const auto q = quartic();
  const double bound = q.max_curvature();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) EXPECT_LE(principal_curvatures(q, q.sample_point(rng)).maxCoeff(), bound);
}

TEST(IntersectRay, Diameter) {
  const auto hit = intersect_ray(Surface::sphere(1.0), v3(1, 0, 0), v3(-1, 0, 0));
  EXPECT_LT((hit.y - v3(-1, 0, 0)).norm(), 1e-12);
  EXPECT_NEAR(hit.chord_length, 2.0, 1e-12);
}

TEST(IntersectRay, UnitCircleQuarterChord) {
  const double r = std::sqrt(0.5);
  const auto hit = intersect_ray(Surface::sphere(1.0, 2), v2(1, 0), v2(-r, r));
  EXPECT_LT((hit.y - v2(0, 1)).norm(), 1e-12);
  EXPECT_NEAR(hit.chord_length, std::sqrt(2.0), 1e-12);
}

TEST(IntersectRay, SphereChordLengthMatchesClosedForm) {
  const auto sphere = Surface::sphere(1.0);
  const Vec x = v3(0, 0, 1);
  for (double phi : {1e-4, 0.01, 0.3, 0.7, 1.2, M_PI / 2}) {
    const Vec z = std::cos(phi) * v3(1, 0, 0) + std::sin(phi) * v3(0, 0, -1);
    const auto hit = intersect_ray(sphere, x, z);
    EXPECT_NEAR(hit.chord_length, 2.0 * std::sin(phi), 1e-12) << "phi = " << phi;
    EXPECT_LT(std::abs(eval(sphere, hit.y)), 1e-10);
  }
}

TEST(IntersectRay, ReversedChordReturnsToStart) {
  const std::vector<Surface> surfaces = {Surface::ellipsoid(v3(0.8, 1.0, 1.2)), quartic()};
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  for (const auto& surface : surfaces) {
    for (int i = 0; i < 100; ++i) {
      const Vec x = surface.sample_point(rng);
      const Vec n = inward_normal(surface, x);
      Vec z = v3(gauss(rng), gauss(rng), gauss(rng));
      if (z.dot(n) < 0.0) z = -z;
      z /= z.norm();
      if (z.dot(n) < 1e-3) continue;
      const auto hit = intersect_ray(surface, x, z);
      EXPECT_LT(std::abs(eval(surface, hit.y)), 1e-10);
      const auto back = intersect_ray(surface, hit.y, -z);
      EXPECT_LT((back.y - x).norm(), 1e-8);
    }
  }
}

TEST(IntersectRay, TangentRayIsRejected) {
  EXPECT_THROW(intersect_ray(Surface::sphere(1.0), v3(0, 0, 1), v3(1, 0, 0)), NearTangentRay);
  EXPECT_THROW(intersect_ray(Surface::sphere(1.0), v3(0, 0, 1), v3(0, 0, 1)), NearTangentRay);
}

TEST(SurfaceJson, ParsesSphereAndEllipsoid) {
  const auto s = surface_from_json(nlohmann::json::parse(R"({"kind":"sphere","radius":1.0})"));
  EXPECT_EQ(s.dimension(), 3);
  EXPECT_DOUBLE_EQ(s.diameter_bound(), 2.0);
  const auto e = surface_from_json(nlohmann::json::parse(R"({"kind":"ellipsoid","semi_axes":[0.3,1.0,1.2]})"));
  EXPECT_NEAR(e.diameter_bound(), 2.4, 1e-15);
  try {
    surface_from_json(nlohmann::json::parse(R"({"kind":"torus"})"));
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& err) {
    EXPECT_STREQ(err.what(), "unknown surface kind: torus");
  }
  EXPECT_THROW(surface_from_json(nlohmann::json::parse(R"({"kind":"sphere","radius":-2})")), std::invalid_argument);
}
