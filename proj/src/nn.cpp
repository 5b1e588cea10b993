#include "hwm/nn.hpp"

#include <cmath>

#include "hwm/error.hpp"

namespace hwm::nn {

Mat Mat::randn(size_t r, size_t c, Rng& rng, double scale) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.normal() * scale;
  return m;
}

Vec matvec(const Mat& m, const Vec& x) {
  if (x.size() != m.cols) {
    throw Error(ErrorKind::DimensionMismatch,
                "matvec: " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                    " applied to vector of length " + std::to_string(x.size()));
  }
  Vec y(m.rows, 0.0);
  for (size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.data.data() + r * m.cols;
    for (size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

Vec matvec_t(const Mat& m, const Vec& y) {
  if (y.size() != m.rows) {
    throw Error(ErrorKind::DimensionMismatch,
                "matvec_t: " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                    " transposed applied to vector of length " + std::to_string(y.size()));
  }
  Vec x(m.cols, 0.0);
  for (size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    for (size_t c = 0; c < m.cols; ++c) x[c] += row[c] * y[r];
  }
  return x;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "dot: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

double cosine(const Vec& a, const Vec& b) {
  double na = norm(a);
  double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "sub: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  Vec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "axpy: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Mlp Mlp::make(const std::vector<size_t>& dims, Rng& rng) {
  if (dims.size() < 2) {
    throw Error(ErrorKind::DimensionMismatch, "mlp needs at least input and output dims");
  }
  Mlp m;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    m.w.push_back(Mat::randn(dims[l + 1], dims[l], rng, 1.0 / std::sqrt(double(dims[l]))));
    m.b.emplace_back(dims[l + 1], 0.0);
  }
  return m;
}

Mlp Mlp::zeros_like(const Mlp& other) {
  Mlp m;
  for (const Mat& w : other.w) m.w.emplace_back(w.rows, w.cols);
  for (const Vec& b : other.b) m.b.emplace_back(b.size(), 0.0);
  return m;
}

Vec Mlp::forward(const Vec& x) const {
  Tape tape;
  return forward(x, tape);
}

Vec Mlp::forward(const Vec& x, Tape& tape) const {
  tape.act.clear();
  tape.act.push_back(x);
  Vec cur = x;
  for (size_t l = 0; l < w.size(); ++l) {
    Vec z = matvec(w[l], cur);
    for (size_t i = 0; i < z.size(); ++i) z[i] += b[l][i];
    if (l + 1 < w.size()) {
      for (double& v : z) v = std::tanh(v);
    }
    tape.act.push_back(z);
    cur = std::move(z);
  }
  return cur;
}

Vec Mlp::backward(const Tape& tape, const Vec& dout, Mlp& grads) const {
  if (tape.act.size() != w.size() + 1) {
    throw Error(ErrorKind::DimensionMismatch, "backward without matching forward tape");
  }
  Vec dz = dout;
  for (size_t l = w.size(); l-- > 0;) {
    // All layers but the last apply tanh; tape stores post-activation values.
    if (l + 1 < w.size()) {
      // dz currently holds dL/d(act[l+1]); fold in tanh'.
      const Vec& a = tape.act[l + 1];
      for (size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - a[i] * a[i];
    }
    const Vec& in = tape.act[l];
    for (size_t r = 0; r < w[l].rows; ++r) {
      grads.b[l][r] += dz[r];
      double* grow = grads.w[l].data.data() + r * w[l].cols;
      for (size_t c = 0; c < w[l].cols; ++c) grow[c] += dz[r] * in[c];
    }
    dz = matvec_t(w[l], dz);
  }
  return dz;
}

void collect_params(Mlp& m, std::vector<double*>& out) {
  for (Mat& w : m.w) collect_params(w, out);
  for (Vec& b : m.b) collect_params(b, out);
}

void collect_params(Mat& m, std::vector<double*>& out) {
  for (double& v : m.data) out.push_back(&v);
}

void collect_params(Vec& v, std::vector<double*>& out) {
  for (double& x : v) out.push_back(&x);
}

void Sgd::step(const std::vector<double*>& params, const std::vector<double*>& grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorKind::DimensionMismatch, "sgd: param and grad lists differ in length");
  }
  if (velocity_.size() != params.size()) velocity_.assign(params.size(), 0.0);
  for (size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] - lr_ * (*grads[i]);
    *params[i] += velocity_[i];
  }
}

}  // namespace hwm::nn
