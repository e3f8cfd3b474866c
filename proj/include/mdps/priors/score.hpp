#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "mdps/core/volume.hpp"
#include "mdps/transforms/fft.hpp"

// Analytic score priors.
//
// A prior exposes the MMSE denoiser x0 = D(x, sigma) for the Gaussian
// corruption model x = x0 + sigma * n, plus the vector-Jacobian product of D
// with respect to x (cotangent convention: real inner product on stacked
// real/imaginary parts). The score of the smoothed density follows from
// Tweedie's identity, score = (D(x, sigma) - x) / sigma^2.

namespace mdps {

class ScorePrior {
 public:
  virtual ~ScorePrior() = default;
  virtual std::string name() const = 0;
  // MMSE denoiser estimate at noise level sigma.
  virtual ComplexVolume denoise(const ComplexVolume& x, double sigma) const = 0;
  // u^T (dD/dx) evaluated at x: pulls the cotangent u back through denoise.
  virtual ComplexVolume vjp(const ComplexVolume& x, double sigma,
                            const ComplexVolume& u) const = 0;
};

inline ComplexVolume tweedie_score(const ScorePrior& prior,
                                   const ComplexVolume& x, double sigma) {
  detail::require(sigma > 0.0, "tweedie_score: sigma must be positive");
  ComplexVolume x0 = prior.denoise(x, sigma);
  const double inv = 1.0 / (sigma * sigma);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    x0.data[i] = (x0.data[i] - x.data[i]) * inv;
  return x0;
}

// Flat prior: the denoiser is the identity, the score is zero.
class IdentityScorePrior final : public ScorePrior {
 public:
  std::string name() const override { return "identity"; }
  ComplexVolume denoise(const ComplexVolume& x, double) const override {
    return x;
  }
  ComplexVolume vjp(const ComplexVolume&, double,
                    const ComplexVolume& u) const override {
    return u;
  }
};

// Gaussian smoothness prior -log p(x) = (lambda/2) ||G x||^2 with G the
// periodic 3-D Laplacian. The MMSE denoiser is the linear filter
//   D(x, sigma) = F^-1 diag(1 / (1 + sigma^2 lambda ell_k)) F x,
// where ell_k are the Laplacian symbol values on the centred DFT grid.
// The filter is self-adjoint under the real inner product, so the vjp is the
// same filter applied to the cotangent.
class QuadraticScorePrior final : public ScorePrior {
 public:
  explicit QuadraticScorePrior(double lambda = 1.0) : lambda_(lambda) {
    detail::require(lambda >= 0.0, "QuadraticScorePrior: lambda must be >= 0");
  }

  std::string name() const override { return "quadratic"; }

  ComplexVolume denoise(const ComplexVolume& x, double sigma) const override {
    return filter(x, sigma);
  }

  ComplexVolume vjp(const ComplexVolume& x, double sigma,
                    const ComplexVolume& u) const override {
    detail::require(u.shape == x.shape, "QuadraticScorePrior::vjp: shape");
    return filter(u, sigma);
  }

  double lambda() const { return lambda_; }

  // Symbol of the periodic Laplacian on the centred grid: for frequency
  // index k in [0, n) (DC at n/2 after fftshift) each axis contributes
  // 2 - 2 cos(2 pi (k - n/2) / n); values lie in [0, 12].
  static RealVolume periodic_laplacian_eigenvalues(const Shape3& shape) {
    RealVolume ell(shape, Spacing3{});
    const auto axis_term = [](std::int64_t k, std::int64_t n) {
      const double theta =
          2.0 * M_PI * static_cast<double>(k - n / 2) / static_cast<double>(n);
      return 2.0 - 2.0 * std::cos(theta);
    };
    std::size_t i = 0;
    for (std::int64_t z = 0; z < shape.nz; ++z) {
      const double ez = axis_term(z, shape.nz);
      for (std::int64_t y = 0; y < shape.ny; ++y) {
        const double ey = axis_term(y, shape.ny);
        for (std::int64_t x = 0; x < shape.nx; ++x)
          ell.data[i++] = ez + ey + axis_term(x, shape.nx);
      }
    }
    return ell;
  }

 private:
  ComplexVolume filter(const ComplexVolume& x, double sigma) const {
    detail::require(sigma >= 0.0, "QuadraticScorePrior: sigma must be >= 0");
    const RealVolume ell = periodic_laplacian_eigenvalues(x.shape);
    ComplexVolume f = fft3(x);
    const double s2l = sigma * sigma * lambda_;
    for (std::size_t i = 0; i < f.data.size(); ++i)
      f.data[i] /= 1.0 + s2l * ell.data[i];
    return ifft3(f);
  }

  double lambda_;
};

inline std::shared_ptr<ScorePrior> make_score_prior(const std::string& kind,
                                                    double lambda = 1.0) {
  if (kind == "identity") return std::make_shared<IdentityScorePrior>();
  if (kind == "quadratic")
    return std::make_shared<QuadraticScorePrior>(lambda);
  detail::require(false, "make_score_prior: unknown prior '" + kind + "'");
  return nullptr;
}

}  // namespace mdps
