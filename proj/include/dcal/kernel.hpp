#pragma once

// Kernels on outcome spaces and exact arithmetic on finite spans of feature
// maps. Outcomes are Eigen column vectors; a span stores its anchors as the
// columns of a matrix and one coefficient per column.

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dcal/errors.hpp"

namespace dcal {

enum class KernelKind { Linear, Min, Exp };

inline std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Min: return "min";
    case KernelKind::Exp: return "exp";
  }
  return "unknown";
}

inline KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "min") return KernelKind::Min;
  if (name == "exp") return KernelKind::Exp;
  throw InvalidInput("unknown kernel kind '" + std::string(name) + "'");
}

/// Reproducing kernel together with its outcome domain.
///
/// - linear(d): K(y1,y2) = <y1,y2> on the ball ||y|| <= R2.
/// - min: K(y1,y2) = min(y1,y2) on [0,1]; requires R2 >= 1.
/// - exp(d): K(y1,y2) = exp(<y1,y2>) on the ball ||y|| <= sqrt(2 ln R2),
///   so that K(y,y) <= R2^2 holds by construction.
template <typename Scalar>
class BasicKernel {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  static BasicKernel linear(Eigen::Index dim, Scalar r2 = Scalar(1)) {
    if (dim < 1) throw InvalidInput("linear kernel needs dimension >= 1");
    return BasicKernel(KernelKind::Linear, dim, r2);
  }

  static BasicKernel min(Scalar r2 = Scalar(1)) {
    if (!(r2 >= Scalar(1)))
      throw InvalidInput("min kernel on [0,1] needs R2 >= 1");
    return BasicKernel(KernelKind::Min, 1, r2);
  }

  static BasicKernel exp(Eigen::Index dim, Scalar r2) {
    if (dim < 1) throw InvalidInput("exp kernel needs dimension >= 1");
    if (!(r2 > Scalar(1))) throw InvalidInput("exp kernel needs R2 > 1");
    return BasicKernel(KernelKind::Exp, dim, r2);
  }

  static BasicKernel make(KernelKind kind, Eigen::Index dim, Scalar r2) {
    switch (kind) {
      case KernelKind::Linear: return linear(dim, r2);
      case KernelKind::Min:
        if (dim != 1) throw InvalidInput("min kernel is one-dimensional");
        return min(r2);
      case KernelKind::Exp: return exp(dim, r2);
    }
    throw InvalidInput("unknown kernel kind");
  }

  KernelKind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  Scalar r2() const { return r2_; }

  // Radius of the Euclidean ball that forms the domain (linear and exp).
  Scalar domain_radius() const {
    switch (kind_) {
      case KernelKind::Linear: return r2_;
      case KernelKind::Exp: return std::sqrt(Scalar(2) * std::log(r2_));
      case KernelKind::Min: return Scalar(1);
    }
    return Scalar(0);
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& y) const {
    if (y.size() != dim_) return false;
    if (!y.allFinite()) return false;
    constexpr Scalar slack = Scalar(1e-12);
    if (kind_ == KernelKind::Min) {
      const Scalar v = y(0);
      return v >= Scalar(0) && v <= Scalar(1);
    }
    return y.norm() <= domain_radius() * (Scalar(1) + slack);
  }

  template <typename Derived>
  void require(const Eigen::MatrixBase<Derived>& y) const {
    if (!contains(y)) {
      throw InvalidInput("outcome outside the domain of the " +
                         std::string(to_string(kind_)) + " kernel");
    }
  }

  // Unchecked evaluation.
  template <typename A, typename B>
  Scalar operator()(const Eigen::MatrixBase<A>& y1,
                    const Eigen::MatrixBase<B>& y2) const {
    switch (kind_) {
      case KernelKind::Linear: return y1.dot(y2);
      case KernelKind::Min: return std::min(y1(0), y2(0));
      case KernelKind::Exp: return std::exp(y1.dot(y2));
    }
    return Scalar(0);
  }

  template <typename A, typename B>
  Scalar eval(const Eigen::MatrixBase<A>& y1,
              const Eigen::MatrixBase<B>& y2) const {
    require(y1);
    require(y2);
    return (*this)(y1, y2);
  }

  /// Cross Gram matrix G(i,j) = K(a_i, b_j) between the columns of a and b.
  template <typename A, typename B>
  Matrix gram(const Eigen::MatrixBase<A>& a,
              const Eigen::MatrixBase<B>& b) const {
    if (a.cols() > 0 && a.rows() != dim_)
      throw ConfigError("anchor dimension does not match kernel");
    if (b.cols() > 0 && b.rows() != dim_)
      throw ConfigError("anchor dimension does not match kernel");
    Matrix g(a.cols(), b.cols());
    if (g.size() == 0) return g;
    switch (kind_) {
      case KernelKind::Linear:
        g.noalias() = a.transpose() * b;
        break;
      case KernelKind::Exp:
        g.noalias() = a.transpose() * b;
        g = g.array().exp().matrix();
        break;
      case KernelKind::Min:
        for (Eigen::Index j = 0; j < b.cols(); ++j)
          for (Eigen::Index i = 0; i < a.cols(); ++i)
            g(i, j) = std::min(a(0, i), b(0, j));
        break;
    }
    return g;
  }

  friend bool operator==(const BasicKernel& l, const BasicKernel& r) {
    return l.kind_ == r.kind_ && l.dim_ == r.dim_ && l.r2_ == r.r2_;
  }
  friend bool operator!=(const BasicKernel& l, const BasicKernel& r) {
    return !(l == r);
  }

 private:
  BasicKernel(KernelKind kind, Eigen::Index dim, Scalar r2)
      : kind_(kind), dim_(dim), r2_(r2) {
    if (!(r2 > Scalar(0)) || !std::isfinite(static_cast<double>(r2)))
      throw InvalidInput("kernel feature-norm bound R2 must be positive");
  }

  KernelKind kind_;
  Eigen::Index dim_;
  Scalar r2_;
};

/// v = sum_i c_i phi(y_i). Immutable value; the empty span is the zero
/// element.
template <typename Scalar>
class BasicRkhsElement {
 public:
  using Kernel = BasicKernel<Scalar>;
  using Vector = typename Kernel::Vector;
  using Matrix = typename Kernel::Matrix;

  explicit BasicRkhsElement(Kernel kernel)
      : kernel_(std::move(kernel)), anchors_(kernel_.dim(), 0) {}

  BasicRkhsElement(Kernel kernel, Matrix anchors, Vector coefficients)
      : kernel_(std::move(kernel)),
        anchors_(std::move(anchors)),
        coefficients_(std::move(coefficients)) {
    if (anchors_.cols() != coefficients_.size())
      throw InvalidInput("span needs one coefficient per anchor");
    if (anchors_.cols() == 0) anchors_.resize(kernel_.dim(), 0);
    if (anchors_.rows() != kernel_.dim())
      throw InvalidInput("anchor dimension does not match kernel");
  }

  template <typename Derived>
  static BasicRkhsElement feature(const Kernel& kernel,
                                  const Eigen::MatrixBase<Derived>& y,
                                  Scalar coefficient = Scalar(1)) {
    kernel.require(y);
    Matrix a = y;
    Vector c(1);
    c(0) = coefficient;
    return BasicRkhsElement(kernel, std::move(a), std::move(c));
  }

  const Kernel& kernel() const { return kernel_; }
  const Matrix& anchors() const { return anchors_; }
  const Vector& coefficients() const { return coefficients_; }
  Eigen::Index size() const { return coefficients_.size(); }
  bool empty() const { return coefficients_.size() == 0; }

  /// Function value v(y) = <v, phi(y)>.
  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& y) const {
    Scalar s(0);
    for (Eigen::Index i = 0; i < size(); ++i)
      s += coefficients_(i) * kernel_(anchors_.col(i), y);
    return s;
  }

 private:
  Kernel kernel_;
  Matrix anchors_;
  Vector coefficients_;
};

using Kernel = BasicKernel<double>;
using RkhsElement = BasicRkhsElement<double>;

template <typename Scalar>
void require_same_kernel(const BasicKernel<Scalar>& a,
                         const BasicKernel<Scalar>& b) {
  if (a != b) throw ConfigError("elements built over different kernels");
}

template <typename Scalar, typename A, typename B>
Scalar eval_kernel(const BasicKernel<Scalar>& kernel,
                   const Eigen::MatrixBase<A>& y1,
                   const Eigen::MatrixBase<B>& y2) {
  return kernel.eval(y1, y2);
}

template <typename Scalar>
Scalar inner(const BasicRkhsElement<Scalar>& u,
             const BasicRkhsElement<Scalar>& v) {
  require_same_kernel(u.kernel(), v.kernel());
  if (u.empty() || v.empty()) return Scalar(0);
  const auto g = u.kernel().gram(u.anchors(), v.anchors());
  return u.coefficients().dot(g * v.coefficients());
}

template <typename Scalar>
Scalar squared_norm(const BasicRkhsElement<Scalar>& v) {
  return inner(v, v);
}

template <typename Scalar>
Scalar norm(const BasicRkhsElement<Scalar>& v) {
  return std::sqrt(std::max(Scalar(0), squared_norm(v)));
}

/// a*u + v, realized by concatenating anchor lists.
template <typename Scalar>
BasicRkhsElement<Scalar> axpy(Scalar a, const BasicRkhsElement<Scalar>& u,
                              const BasicRkhsElement<Scalar>& v) {
  require_same_kernel(u.kernel(), v.kernel());
  using Matrix = typename BasicRkhsElement<Scalar>::Matrix;
  using Vector = typename BasicRkhsElement<Scalar>::Vector;
  Matrix anchors(u.kernel().dim(), u.size() + v.size());
  anchors << u.anchors(), v.anchors();
  Vector coeffs(u.size() + v.size());
  coeffs << a * u.coefficients(), v.coefficients();
  return BasicRkhsElement<Scalar>(u.kernel(), std::move(anchors),
                                  std::move(coeffs));
}

template <typename Scalar>
BasicRkhsElement<Scalar> scaled(const BasicRkhsElement<Scalar>& v, Scalar s) {
  return BasicRkhsElement<Scalar>(v.kernel(), v.anchors(),
                                  s * v.coefficients());
}

template <typename Scalar>
BasicRkhsElement<Scalar> operator+(const BasicRkhsElement<Scalar>& u,
                                   const BasicRkhsElement<Scalar>& v) {
  return axpy(Scalar(1), u, v);
}

template <typename Scalar>
BasicRkhsElement<Scalar> operator-(const BasicRkhsElement<Scalar>& u,
                                   const BasicRkhsElement<Scalar>& v) {
  return axpy(Scalar(-1), v, u);
}

template <typename Scalar>
BasicRkhsElement<Scalar> operator*(Scalar s, const BasicRkhsElement<Scalar>& v) {
  return scaled(v, s);
}

namespace detail {

template <typename Derived>
std::string anchor_key(const Eigen::MatrixBase<Derived>& column) {
  using Scalar = typename Derived::Scalar;
  std::string key(static_cast<std::size_t>(column.size()) * sizeof(Scalar), '\0');
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const Scalar v = column(i);
    std::memcpy(key.data() + static_cast<std::size_t>(i) * sizeof(Scalar), &v,
                sizeof(Scalar));
  }
  return key;
}

}  // namespace detail

/// Deduplicating anchor list: columns are appended only when no
/// bitwise-identical column exists. Indices are stable.
template <typename Scalar>
class BasicAnchorSet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit BasicAnchorSet(Eigen::Index dim) : dim_(dim) {}

  template <typename Derived>
  Eigen::Index insert(const Eigen::MatrixBase<Derived>& y) {
    auto [it, added] = index_.try_emplace(detail::anchor_key(y), count_);
    if (added) {
      columns_.insert(columns_.end(), y.derived().data(),
                      y.derived().data() + dim_);
      ++count_;
    }
    return it->second;
  }

  template <typename Derived>
  Eigen::Index find(const Eigen::MatrixBase<Derived>& y) const {
    auto it = index_.find(detail::anchor_key(y));
    return it == index_.end() ? Eigen::Index(-1) : it->second;
  }

  Eigen::Index size() const { return count_; }
  Eigen::Index dim() const { return dim_; }

  Matrix matrix() const {
    return Eigen::Map<const Matrix>(columns_.data(), dim_, count_);
  }

  Eigen::Map<const Matrix> view() const {
    return Eigen::Map<const Matrix>(columns_.data(), dim_, count_);
  }

 private:
  Eigen::Index dim_;
  Eigen::Index count_ = 0;
  std::vector<Scalar> columns_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

using AnchorSet = BasicAnchorSet<double>;

/// Merges coefficients of bitwise-identical anchors (first occurrence keeps
/// its position) and drops terms with |c_i| * sqrt(K(y_i,y_i)) <= tol.
template <typename Scalar>
BasicRkhsElement<Scalar> compress(const BasicRkhsElement<Scalar>& v,
                                  Scalar tol) {
  if (tol < Scalar(0)) throw InvalidInput("compress tolerance must be >= 0");
  using Matrix = typename BasicRkhsElement<Scalar>::Matrix;
  using Vector = typename BasicRkhsElement<Scalar>::Vector;
  BasicAnchorSet<Scalar> merged(v.kernel().dim());
  std::vector<Scalar> sums;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Eigen::Index j = merged.insert(v.anchors().col(i));
    if (j == static_cast<Eigen::Index>(sums.size())) sums.push_back(Scalar(0));
    sums[static_cast<std::size_t>(j)] += v.coefficients()(i);
  }
  const Matrix all = merged.matrix();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < all.cols(); ++j) {
    const Scalar c = sums[static_cast<std::size_t>(j)];
    const Scalar self = v.kernel()(all.col(j), all.col(j));
    if (std::abs(c) * std::sqrt(std::max(Scalar(0), self)) > tol)
      keep.push_back(j);
  }
  Matrix anchors(v.kernel().dim(), static_cast<Eigen::Index>(keep.size()));
  Vector coeffs(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    anchors.col(static_cast<Eigen::Index>(k)) = all.col(keep[k]);
    coeffs(static_cast<Eigen::Index>(k)) = sums[static_cast<std::size_t>(keep[k])];
  }
  return BasicRkhsElement<Scalar>(v.kernel(), std::move(anchors),
                                  std::move(coeffs));
}

/// For the linear kernel phi is the identity, so a span has an explicit
/// representer sum_i c_i y_i.
template <typename Scalar>
typename BasicRkhsElement<Scalar>::Vector linear_representer(
    const BasicRkhsElement<Scalar>& v) {
  if (v.kernel().kind() != KernelKind::Linear)
    throw ConfigError("explicit representer exists only for the linear kernel");
  return v.anchors() * v.coefficients();
}

}  // namespace dcal
