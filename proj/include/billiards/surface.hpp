#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>

#include "billiards/errors.hpp"

namespace billiards {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace tolerance {
/// |F(x)| allowed for a point to count as lying on the surface.
inline constexpr double kOnSurface = 1e-8;
/// Residual |F(y)| required of a ray intersection.
inline constexpr double kRayResidual = 1e-10;
/// sin(phi) below which a chord is treated as grazing.
inline constexpr double kGrazing = 1e-6;
}  // namespace tolerance

/// Round sphere |x|^2 - r^2 = 0 centred at the origin.
struct Sphere {
  double radius = 1.0;
  int dimension = 3;
};

/// Axis-aligned ellipsoid sum (x_i / a_i)^2 - 1 = 0.
struct Ellipsoid {
  Vec semi_axes;
};

/// User-supplied level set F = 0 with F < 0 inside. Gradient and Hessian are required.
struct GenericImplicit {
  int dimension = 3;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
  double diameter_bound = 0.0;
  /// Any point strictly inside the body; used for radial sampling.
  Vec interior_point;
  std::string label = "implicit";
};

/// A C^2 strictly convex hypersurface given implicitly.
class Surface {
 public:
  using Kind = std::variant<Sphere, Ellipsoid, GenericImplicit>;

  static Surface sphere(double radius, int dimension = 3) {
    if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
    if (dimension < 2) throw std::invalid_argument("sphere dimension must be at least 2");
    return Surface(Sphere{radius, dimension});
  }

  static Surface ellipsoid(Vec semi_axes) {
    if (semi_axes.size() < 2) throw std::invalid_argument("ellipsoid needs at least 2 semi-axes");
    if ((semi_axes.array() <= 0.0).any() || !semi_axes.allFinite()) {
      throw std::invalid_argument("ellipsoid semi-axes must be positive");
    }
    return Surface(Ellipsoid{std::move(semi_axes)});
  }

  static Surface implicit(GenericImplicit spec) {
    if (spec.dimension < 2) throw std::invalid_argument("implicit surface dimension must be at least 2");
    if (!spec.value || !spec.gradient || !spec.hessian) {
      throw std::invalid_argument("implicit surface requires value, gradient and Hessian evaluators");
    }
    if (!(spec.diameter_bound > 0.0)) throw std::invalid_argument("implicit surface needs a positive diameter bound");
    if (spec.interior_point.size() == 0) spec.interior_point = Vec::Zero(spec.dimension);
    if (spec.interior_point.size() != spec.dimension) {
      throw std::invalid_argument("interior point has the wrong dimension");
    }
    if (!(spec.value(spec.interior_point) < 0.0)) {
      throw std::invalid_argument("interior point is not inside the surface");
    }
    return Surface(std::move(spec));
  }

  const Kind& kind() const { return kind_; }

  int dimension() const {
    return std::visit(
        [](const auto& k) -> int {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Ellipsoid>) {
            return static_cast<int>(k.semi_axes.size());
          } else {
            return k.dimension;
          }
        },
        kind_);
  }

  /// Upper bound D for the Euclidean diameter of the enclosed body (exact for quadrics).
  double diameter_bound() const {
    return std::visit(
        [](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            return 2.0 * k.radius;
          } else if constexpr (std::is_same_v<T, Ellipsoid>) {
            return 2.0 * k.semi_axes.maxCoeff();
          } else {
            return k.diameter_bound;
          }
        },
        kind_);
  }

  double value(const Vec& x) const {
    return std::visit(
        [&](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            return x.squaredNorm() - k.radius * k.radius;
          } else if constexpr (std::is_same_v<T, Ellipsoid>) {
            return x.cwiseQuotient(k.semi_axes).squaredNorm() - 1.0;
          } else {
            return k.value(x);
          }
        },
        kind_);
  }

  Vec gradient(const Vec& x) const {
    return std::visit(
        [&](const auto& k) -> Vec {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            return 2.0 * x;
          } else if constexpr (std::is_same_v<T, Ellipsoid>) {
            return 2.0 * x.cwiseQuotient(k.semi_axes.cwiseProduct(k.semi_axes));
          } else {
            return k.gradient(x);
          }
        },
        kind_);
  }

  Mat hessian(const Vec& x) const {
    return std::visit(
        [&](const auto& k) -> Mat {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            return 2.0 * Mat::Identity(k.dimension, k.dimension);
          } else if constexpr (std::is_same_v<T, Ellipsoid>) {
            Vec d = 2.0 * k.semi_axes.cwiseProduct(k.semi_axes).cwiseInverse();
            return d.asDiagonal();
          } else {
            return k.hessian(x);
          }
        },
        kind_);
  }

  /// Upper bound on every normal curvature of the surface. Exact for spheres and
  /// ellipsoids; sampled (inflated by 5%) for generic surfaces.
  double max_curvature() const;

  /// Point on the surface in the radial direction `u` from the interior point.
  Vec radial_point(const Vec& u) const;

  /// Uniformly random direction pushed radially onto the surface.
  template <typename Rng>
  Vec sample_point(Rng& rng) const {
    std::normal_distribution<double> gauss;
    Vec u(dimension());
    do {
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = gauss(rng);
    } while (u.norm() < 1e-12);
    return radial_point(u / u.norm());
  }

  std::string describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            os << "sphere(r=" << k.radius << ", d=" << k.dimension << ")";
          } else if constexpr (std::is_same_v<T, Ellipsoid>) {
            os << "ellipsoid(";
            for (Eigen::Index i = 0; i < k.semi_axes.size(); ++i) os << (i ? "," : "") << k.semi_axes[i];
            os << ")";
          } else {
            os << k.label;
          }
        },
        kind_);
    return os.str();
  }

 private:
  explicit Surface(Kind kind) : kind_(std::move(kind)) {}

  Kind kind_;
};

/// Orthonormal basis of T_x Sigma stored as the columns of a d x (d-1) matrix.
struct TangentFrame {
  Vec base_point;
  Mat vectors;

  int size() const { return static_cast<int>(vectors.cols()); }
  Vec coords(const Vec& ambient) const { return vectors.transpose() * ambient; }
  Vec ambient(const Vec& coords) const { return vectors * coords; }
};

inline double eval(const Surface& surface, const Vec& x) { return surface.value(x); }

namespace detail {

inline void require_dimension(const Surface& surface, const Vec& x) {
  if (x.size() != surface.dimension()) {
    throw std::invalid_argument("point dimension " + std::to_string(x.size()) + " does not match surface dimension " +
                                std::to_string(surface.dimension()));
  }
}

inline void require_on_surface(const Surface& surface, const Vec& x) {
  require_dimension(surface, x);
  const double f = surface.value(x);
  if (!(std::abs(f) < tolerance::kOnSurface)) {
    std::ostringstream os;
    os << "point is not on the surface (|F| = " << std::abs(f) << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace detail

/// Unit normal pointing into the body, n = -grad F / |grad F|.
inline Vec inward_normal(const Surface& surface, const Vec& x) {
  detail::require_on_surface(surface, x);
  Vec g = surface.gradient(x);
  const double norm = g.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateSurfacePoint("gradient vanishes on the surface");
  return -g / norm;
}

struct TangentSplit {
  Vec v;
  double v_hat = 0.0;
};

/// Splits z = v + v_hat * n_x into its tangent part and its normal component.
inline TangentSplit project_tangent(const Surface& surface, const Vec& x, const Vec& z) {
  const Vec n = inward_normal(surface, x);
  const double v_hat = z.dot(n);
  if (v_hat < -1e-12) throw std::invalid_argument("vector points out of the body");
  return {z - v_hat * n, v_hat};
}

/// Orthogonal projection of an ambient vector onto T_x Sigma.
inline Vec project_onto_tangent(const Vec& normal, const Vec& a) { return a - a.dot(normal) * normal; }

/// Deterministic frame: drop the coordinate axis most parallel to the normal
/// (lowest index on ties) and Gram-Schmidt the rest against the normal.
inline TangentFrame tangent_frame(const Surface& surface, const Vec& x) {
  const Vec n = inward_normal(surface, x);
  const int d = static_cast<int>(n.size());
  int dropped = 0;
  for (int i = 1; i < d; ++i) {
    if (std::abs(n[i]) > std::abs(n[dropped])) dropped = i;
  }
  Mat basis(d, d - 1);
  int col = 0;
  for (int i = 0; i < d; ++i) {
    if (i == dropped) continue;
    Vec u = Vec::Unit(d, i);
    // two passes of classical Gram-Schmidt keep the frame orthonormal to ~1e-16
    for (int pass = 0; pass < 2; ++pass) {
      u -= u.dot(n) * n;
      for (int j = 0; j < col; ++j) u -= u.dot(basis.col(j)) * basis.col(j);
    }
    basis.col(col++) = u / u.norm();
  }
  return {x, basis};
}

/// Shape operator S(xi) = -nabla_xi n for the inward normal; positive on convex bodies.
inline Vec shape_operator(const Surface& surface, const Vec& x, const Vec& xi) {
  detail::require_on_surface(surface, x);
  const Vec g = surface.gradient(x);
  const double norm = g.norm();
  if (!(norm > 0.0)) throw DegenerateSurfacePoint("gradient vanishes on the surface");
  const Vec outward = g / norm;
  const Vec h_xi = surface.hessian(x) * xi;
  return (h_xi - h_xi.dot(outward) * outward) / norm;
}

/// Matrix of the shape operator in the given frame.
inline Mat shape_matrix(const Surface& surface, const TangentFrame& frame) {
  detail::require_on_surface(surface, frame.base_point);
  const double norm = surface.gradient(frame.base_point).norm();
  if (!(norm > 0.0)) throw DegenerateSurfacePoint("gradient vanishes on the surface");
  Mat s = frame.vectors.transpose() * surface.hessian(frame.base_point) * frame.vectors / norm;
  return 0.5 * (s + s.transpose());
}

inline double second_fundamental_form(const Surface& surface, const Vec& x, const Vec& xi, const Vec& eta) {
  return shape_operator(surface, x, xi).dot(eta);
}

/// Principal curvatures at x in ascending order.
inline Vec principal_curvatures(const Surface& surface, const Vec& x) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(shape_matrix(surface, tangent_frame(surface, x)),
                                            Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

struct RayHit {
  Vec y;
  double chord_length = 0.0;
};

/// Second intersection of the ray x + t z (t > 0) with the surface.
///
/// Safeguarded Newton on t -> F(x + t z) inside the bracket [t_min, 2 D]. F is
/// negative just after leaving x along an inward ray and positive beyond the
/// diameter, so the bracket always holds a sign change unless the ray grazes.
inline RayHit intersect_ray(const Surface& surface, const Vec& x, const Vec& z) {
  const Vec n = inward_normal(surface, x);
  const double normal_component = z.dot(n);
  if (!(normal_component > 0.0)) {
    throw NearTangentRay("ray does not enter the body (normal component " + std::to_string(normal_component) + ")");
  }
  const double z_norm = z.norm();
  const Vec dir = z / z_norm;
  auto f = [&](double t) { return surface.value(x + t * dir); };
  auto df = [&](double t) { return surface.gradient(x + t * dir).dot(dir); };

  double hi = 2.0 * surface.diameter_bound();
  double lo = 1e-7;
  while (f(lo) >= 0.0) {
    lo *= 0.5;
    if (lo < 1e-14) throw NearTangentRay("bracketing cannot separate the exit point from the start");
  }
  if (!(f(hi) > 0.0)) throw std::logic_error("diameter bound does not enclose the surface");

  // quadratic model of F along the ray gives a good first guess
  const double slope = surface.gradient(x).dot(dir);
  const double curv = dir.dot(surface.hessian(x) * dir);
  double t = (curv > 0.0 && slope < 0.0) ? -2.0 * slope / curv : 0.5 * (lo + hi);
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);

  for (int iter = 0; iter < 200; ++iter) {
    const double ft = f(t);
    if (ft == 0.0) {
      lo = hi = t;
      break;
    }
    if (ft < 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    const double dft = df(t);
    double next = (dft != 0.0) ? t - ft / dft : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4.0 * std::numeric_limits<double>::epsilon() * t || hi - lo <= 1e-15 * hi) {
      t = next;
      break;
    }
    t = next;
  }
  Vec y = x + t * dir;
  if (!(std::abs(surface.value(y)) < tolerance::kRayResidual)) {
    throw NearTangentRay("ray intersection did not converge");
  }
  return {y, t};
}

inline double Surface::max_curvature() const {
  if (const auto* s = std::get_if<Sphere>(&kind_)) return 1.0 / s->radius;
  if (const auto* e = std::get_if<Ellipsoid>(&kind_)) {
    const double a_min = e->semi_axes.minCoeff();
    return e->semi_axes.maxCoeff() / (a_min * a_min);
  }
  std::mt19937_64 rng(7);
  double k = 0.0;
  for (int i = 0; i < 4096; ++i) {
    k = std::max(k, principal_curvatures(*this, sample_point(rng)).maxCoeff());
  }
  return 1.05 * k;
}

inline Vec Surface::radial_point(const Vec& u) const {
  if (const auto* s = std::get_if<Sphere>(&kind_)) return s->radius * u / u.norm();
  if (const auto* e = std::get_if<Ellipsoid>(&kind_)) return u / u.cwiseQuotient(e->semi_axes).norm();
  const auto& g = std::get<GenericImplicit>(kind_);
  const Vec dir = u / u.norm();
  double lo = 0.0;
  double hi = g.diameter_bound;
  for (int iter = 0; iter < 200 && hi - lo > 1e-16 * g.diameter_bound; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (g.value(g.interior_point + mid * dir) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Newton polish along the ray
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 3; ++iter) {
    const Vec p = g.interior_point + t * dir;
    const double slope = g.gradient(p).dot(dir);
    if (slope == 0.0) break;
    t -= g.value(p) / slope;
  }
  return g.interior_point + t * dir;
}

}  // namespace billiards
