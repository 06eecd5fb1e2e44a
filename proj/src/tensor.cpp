#include "frt/tensor.hpp"

#include <cmath>

namespace frt {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

void TensorNode::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
}

static void validate_shape(const Shape& shape) {
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError(msg("non-positive extent in shape ", shape_str(shape)));
  }
}

Tensor Tensor::zeros(const Shape& shape) {
  validate_shape(shape);
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->values.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::full(const Shape& shape, double value) {
  if (!std::isfinite(value)) throw NumericError("Tensor::full: non-finite fill value");
  Tensor t = zeros(shape);
  for (auto& v : t.node()->values) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from_data(const Shape& shape, std::vector<double> values) {
  validate_shape(shape);
  if (static_cast<int64_t>(values.size()) != shape_numel(shape)) {
    throw ShapeError(msg("from_data: ", values.size(), " values for shape ", shape_str(shape)));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("from_data: non-finite value");
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->values = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::rand_uniform(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t = zeros(shape);
  for (auto& v : t.node()->values) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::rand_normal(const Shape& shape, Rng& rng, double mean, double stddev) {
  Tensor t = zeros(shape);
  for (auto& v : t.node()->values) v = rng.normal(mean, stddev);
  return t;
}

int64_t Tensor::dim(int64_t axis) const {
  const int64_t r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError(msg("axis ", axis, " out of range for shape ", shape_str(shape())));
  }
  return node_->shape[static_cast<size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError(msg("item() on non-scalar shape ", shape_str(shape())));
  return node_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) {
    throw Error("grad() requested but no gradient has been accumulated");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) node_->grad.assign(node_->grad.size(), 0.0);
}

// ---- tape ---------------------------------------------------------------

void GradTape::record(TapeRecord rec) {
  records_.push_back(std::move(rec));
}

void GradTape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError(msg("backward: loss must be scalar, got shape ", shape_str(loss.shape())));
  }
  if (records_.empty()) throw Error("backward: tape is empty");
  if (consumed_) throw Error("backward: tape already consumed; call reset() first");
  consumed_ = true;

  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;

  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from the loss
    it->backward();
  }
}

void GradTape::reset() {
  records_.clear();
  consumed_ = false;
}

GradTape& tape() {
  thread_local GradTape instance;
  return instance;
}

NoGradGuard::NoGradGuard() { ++tape().no_grad_depth_; }
NoGradGuard::~NoGradGuard() { --tape().no_grad_depth_; }

void backward(const Tensor& loss) { tape().backward(loss); }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad,
                   const char* op) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  Tensor t(std::move(node));
  check_finite(t, op);
  return t;
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericError(msg(op, ": non-finite value in output of shape ",
                             shape_str(t.shape())));
    }
  }
}

bool track(const Tensor& a) { return tape().recording() && a.requires_grad(); }
bool track(const Tensor& a, const Tensor& b) {
  return tape().recording() && (a.requires_grad() || b.requires_grad());
}
bool track(const Tensor& a, const Tensor& b, const Tensor& c) {
  return tape().recording() &&
         (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n) {
  for (int64_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail
}  // namespace frt
