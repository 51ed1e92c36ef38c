#ifndef EE_TENSOR_HPP
#define EE_TENSOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace ee {

using Mat = Eigen::MatrixXd;

// Thrown by primitives on incompatible operand shapes; the message names the
// primitive.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Init { xavier_uniform, normal_002, zeros };

// Per-parameter Adam accumulators.
struct AdamState {
  Mat m;  // first moment
  Mat v;  // second moment
  long step = 0;
};

// Named dense parameters with gradient buffers and optimizer state. All
// matrices are row-major 2-D; vectors are 1 x n rows.
class ParamStore {
 public:
  // Creates (or returns the existing) parameter of the given shape.
  Mat& add(const std::string& name, int rows, int cols, Init init,
           std::mt19937_64& rng);

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Mat& grad(const std::string& name);  // same shape, zero-initialized

  void zero_grads();
  std::vector<std::string> names() const;  // sorted

  // Adam update over every parameter whose grad buffer exists; clears grads.
  // beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
  void adam_step(double lr);

  // Versioned JSON checkpoint with parameters, Adam state and an arbitrary
  // config blob; reload is bit-exact.
  std::string to_json(const std::string& config_json = "{}") const;
  static ParamStore from_json(const std::string& json,
                              std::string* config_json = nullptr);
  void save(const std::string& path, const std::string& config_json = "{}") const;
  static ParamStore load(const std::string& path,
                         std::string* config_json = nullptr);

  bool operator==(const ParamStore& o) const;

 private:
  std::map<std::string, Mat> params_;
  std::map<std::string, Mat> grads_;
  std::map<std::string, AdamState> adam_;
};

// One node of a recorded computation. Values are 2-D; a scalar is 1 x 1.
struct Value {
  Mat val;
  Mat grad;                        // allocated lazily by backward()
  bool requires_grad = false;
  std::function<void(Value&)> backward_fn;  // pulls this->grad into parents
  int order = 0;                   // creation index on the tape
};

// Reverse-mode tape. Nodes live as long as the tape; a forward pass records
// closures that backward() replays in reverse creation order. Inputs are
// never mutated; parameter gradients accumulate into the ParamStore.
class Tape {
 public:
  Value* constant(const Mat& m);
  // Leaf bound to store[name]; backward adds into store.grad(name).
  Value* param(ParamStore& store, const std::string& name);

  Value* matmul(Value* a, Value* b);
  Value* add(Value* a, Value* b);          // same shape
  Value* scale(Value* a, double s);
  Value* mul(Value* a, Value* b);          // elementwise, same shape
  Value* concat_cols(const std::vector<Value*>& parts);  // equal row counts
  Value* concat_rows(const std::vector<Value*>& parts);  // equal col counts
  // Row-wise outer products: a is n x p, b is n x q; row r of the n x (p*q)
  // result holds a_r (x) b_r row-major: out(r, i*q + j) = a(r,i) * b(r,j).
  Value* outer_rows(Value* a, Value* b);
  // Gathers table rows (embedding lookup); indices may repeat.
  Value* rows(Value* table, const std::vector<int>& indices);
  Value* maxpool_rows(Value* a);           // column-wise max over rows -> 1 x c
  Value* affine(Value* x, Value* w, Value* b);  // x*w + b (b broadcast per row)
  Value* relu(Value* a);
  // Inverted-scaling dropout; identity when !train or rate == 0.
  Value* dropout(Value* a, double rate, bool train, std::mt19937_64& rng);
  Value* softmax_rows(Value* a);
  // Mean of -log(probs[i, target[i]]); probs from softmax_rows. Scalar.
  Value* nll_loss(Value* probs, const std::vector<int>& targets);
  // Vector-valued bilinear form: a is 1 x p, b is 1 x q, w is k x (p*q) with
  // row r holding the r-th p x q form row-major. Result is 1 x k with
  // out[r] = a * W_r * b^T.
  Value* bilinear(Value* a, Value* w, Value* b);
  Value* sum_all(Value* a);                // scalar

  // Backpropagates d(root)/d(everything); root must be scalar.
  void backward(Value* root);

  size_t size() const { return nodes_.size(); }

 private:
  Value* make(Mat val, bool requires_grad);
  static void ensure_grad(Value* v);

  std::vector<std::unique_ptr<Value>> nodes_;
};

// Runs f (which must record gradients into store on its own tape) once for
// the analytic gradient, then central finite differences on up to n_coords
// randomly chosen coordinates. Returns the max relative error
// |analytic - fd| / max(1, |analytic|, |fd|).
double grad_check(const std::function<double(ParamStore&)>& f,
                  ParamStore& store, double epsilon = 1e-5,
                  int n_coords = 120, uint64_t seed = 0);

}  // namespace ee

#endif  // EE_TENSOR_HPP
