#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "frt/error.hpp"
#include "frt/rng.hpp"

namespace frt {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense f64 tensor node. Values are contiguous row-major; grad is empty
// until backward touches the node.
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
  void ensure_grad();
};

// Value-like handle with shared storage. Copying a Tensor aliases the same
// buffer; ops never mutate their inputs, so aliasing is only observable for
// parameters that are updated in place by the optimizer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(const Shape& shape, std::vector<double> values);
  static Tensor rand_uniform(const Shape& shape, Rng& rng, double lo, double hi);
  static Tensor rand_normal(const Shape& shape, Rng& rng, double mean, double stddev);

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t rank() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t dim(int64_t axis) const;  // negative axis counts from the back
  int64_t numel() const { return node_->numel(); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> values_mut() { return node_->values; }
  double flat(int64_t i) const { return node_->values[static_cast<size_t>(i)]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const;
  void zero_grad();

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// One recorded differentiable operation.
struct TapeRecord {
  const char* op = "";
  std::shared_ptr<TensorNode> output;
  std::function<void()> backward;
};

// Reverse-mode tape. Single-threaded: one instance per thread, fetched with
// tape(). Records are appended in execution order, which is a topological
// order of the graph, so one reverse sweep propagates every contribution.
class GradTape {
 public:
  bool recording() const { return no_grad_depth_ == 0; }
  void record(TapeRecord rec);
  size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
  // gradients into every reachable requires_grad tensor.
  void backward(const Tensor& loss);
  void reset();

 private:
  friend class NoGradGuard;
  std::vector<TapeRecord> records_;
  bool consumed_ = false;
  int no_grad_depth_ = 0;
};

GradTape& tape();

// Scoped guard: ops executed while alive are not recorded and their outputs
// do not require grad.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

void backward(const Tensor& loss);

// ---- differentiable primitives ----------------------------------------
// Binary elementwise ops broadcast right-aligned: every trailing dim must
// match or be 1 on one side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// (..., M, K) x (..., K, N) -> (..., M, N). Leading dims must match exactly
// or one operand must be rank-2 (shared across the other's batch).
Tensor matmul(const Tensor& a, const Tensor& b);

// x: (H, W, Cin) or (N, H, W, Cin); w: (KH, KW, Cin, Cout); zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int64_t stride = 1, int64_t pad = 0);
Tensor conv2d(const Tensor& x, const Tensor& w, int64_t stride = 1,
              int64_t pad = 0);

Tensor transpose(const Tensor& x, int64_t axis0, int64_t axis1);
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis);
std::vector<Tensor> split(const Tensor& x, int64_t axis, int64_t parts);

Tensor relu(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor logsigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor softmax(const Tensor& x, int64_t axis);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-6);
Tensor group_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  int64_t groups, double eps = 1e-6);

Tensor avg_pool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// L1 / squared-L2 reductions: mean |a-b| and mean (a-b)^2.
Tensor l1_mean(const Tensor& a, const Tensor& b);
Tensor sq_l2_mean(const Tensor& a, const Tensor& b);

// Rows of `table` (M, C) selected by index -> (P, C); backward scatter-adds.
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& indices);

// Forward copies `quantized` bit-exactly; backward passes the incoming
// gradient to `source` untouched and nothing to `quantized`.
Tensor straight_through(const Tensor& source, const Tensor& quantized);

// Stop-gradient: same values, cut off from the tape.
Tensor detach(const Tensor& x);

// ---- internal helpers shared by op implementations ---------------------
namespace detail {
Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad,
                   const char* op);
void check_finite(const Tensor& t, const char* op);
bool track(const Tensor& a);
bool track(const Tensor& a, const Tensor& b);
bool track(const Tensor& a, const Tensor& b, const Tensor& c);

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n);
// C[m,n] += A[m,k] * B[n,k]
void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n);
// C[m,n] += A[k,m] * B[k,n]
void gemm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k,
             int64_t n);
}  // namespace detail

}  // namespace frt
