#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hwm/rng.hpp"

namespace hwm::nn {

using Vec = std::vector<double>;

// Dense row-major matrix.
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }

  static Mat randn(size_t r, size_t c, Rng& rng, double scale);
};

// Throws Error(DimensionMismatch) on shape violations.
Vec matvec(const Mat& m, const Vec& x);
Vec matvec_t(const Mat& m, const Vec& y);  // m^T y

double dot(const Vec& a, const Vec& b);
double norm(const Vec& v);
double cosine(const Vec& a, const Vec& b);  // 0 when either norm is 0
Vec sub(const Vec& a, const Vec& b);
void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x
bool all_finite(const Vec& v);

// Feed-forward network: affine layers with tanh on all but the last.
struct Mlp {
  std::vector<Mat> w;
  std::vector<Vec> b;

  // dims = {in, hidden..., out}; weights N(0,1)/sqrt(fan_in).
  static Mlp make(const std::vector<size_t>& dims, Rng& rng);
  static Mlp zeros_like(const Mlp& other);

  size_t in_dim() const { return w.empty() ? 0 : w.front().cols; }
  size_t out_dim() const { return w.empty() ? 0 : b.back().size(); }

  Vec forward(const Vec& x) const;

  // Activations recorded during forward, consumed by backward.
  struct Tape {
    std::vector<Vec> act;  // act[0] = input, act[l+1] = output of layer l
  };
  Vec forward(const Vec& x, Tape& tape) const;

  // Accumulates parameter gradients into `grads` (same shapes) and returns
  // dL/dinput, given dL/doutput.
  Vec backward(const Tape& tape, const Vec& dout, Mlp& grads) const;
};

// Flat parameter views for optimizers and finite-difference checks.
void collect_params(Mlp& m, std::vector<double*>& out);
void collect_params(Mat& m, std::vector<double*>& out);
void collect_params(Vec& v, std::vector<double*>& out);

// Plain gradient descent with optional momentum over parallel param/grad
// pointer lists.
class Sgd {
 public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(const std::vector<double*>& params, const std::vector<double*>& grads);

 private:
  double lr_;
  double momentum_;
  std::vector<double> velocity_;
};

}  // namespace hwm::nn
