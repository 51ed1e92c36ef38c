#include "ee/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ee {

namespace {

using json = nlohmann::json;

[[noreturn]] void dim_error(const std::string& op, const Mat& a, const Mat& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << a.rows() << "x" << a.cols()
      << " and " << b.rows() << "x" << b.cols();
  throw DimensionError(msg.str());
}

Mat init_matrix(int rows, int cols, Init init, std::mt19937_64& rng) {
  Mat m(rows, cols);
  switch (init) {
    case Init::zeros:
      m.setZero();
      break;
    case Init::xavier_uniform: {
      double bound = std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
      break;
    }
    case Init::normal_002: {
      std::normal_distribution<double> dist(0.0, 0.02);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
      break;
    }
  }
  return m;
}

json mat_to_json(const Mat& m) {
  json values = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  return json{{"shape", {m.rows(), m.cols()}}, {"values", values}};
}

Mat mat_from_json(const json& j) {
  auto shape = j.at("shape");
  Mat m(shape.at(0).get<int>(), shape.at(1).get<int>());
  const auto& values = j.at("values");
  if (static_cast<Eigen::Index>(values.size()) != m.size())
    throw std::runtime_error("checkpoint matrix has wrong element count");
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = values.at(k++).get<double>();
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore

Mat& ParamStore::add(const std::string& name, int rows, int cols, Init init,
                     std::mt19937_64& rng) {
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  return params_.emplace(name, init_matrix(rows, cols, init, rng)).first->second;
}

Mat& ParamStore::value(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::runtime_error("unknown parameter: " + name);
  return it->second;
}

const Mat& ParamStore::value(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::runtime_error("unknown parameter: " + name);
  return it->second;
}

Mat& ParamStore::grad(const std::string& name) {
  const Mat& p = value(name);
  auto it = grads_.find(name);
  if (it == grads_.end())
    it = grads_.emplace(name, Mat::Zero(p.rows(), p.cols())).first;
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads_) g.setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;  // std::map iterates sorted
}

void ParamStore::adam_step(double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (grads_.empty()) throw std::runtime_error("adam_step: no gradients");
  for (auto& [name, g] : grads_) {
    Mat& p = value(name);
    AdamState& st = adam_[name];
    if (st.m.size() == 0) {
      st.m = Mat::Zero(p.rows(), p.cols());
      st.v = Mat::Zero(p.rows(), p.cols());
    }
    ++st.step;
    st.m = beta1 * st.m + (1.0 - beta1) * g;
    st.v = beta2 * st.v + (1.0 - beta2) * g.cwiseProduct(g);
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
    Mat m_hat = st.m / bc1;
    Mat v_hat = st.v / bc2;
    p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
    g.setZero();
  }
}

std::string ParamStore::to_json(const std::string& config_json) const {
  json out;
  out["format_version"] = 1;
  out["config"] = json::parse(config_json);
  json params = json::object();
  for (const auto& [name, p] : params_) params[name] = mat_to_json(p);
  out["params"] = params;
  json adam = json::object();
  for (const auto& [name, st] : adam_) {
    adam[name] = {{"m", mat_to_json(st.m)},
                  {"v", mat_to_json(st.v)},
                  {"step", st.step}};
  }
  out["adam"] = adam;
  return out.dump();
}

ParamStore ParamStore::from_json(const std::string& text,
                                 std::string* config_json) {
  json in = json::parse(text);
  if (in.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint format version");
  if (config_json) *config_json = in.at("config").dump();
  ParamStore store;
  for (const auto& [name, j] : in.at("params").items())
    store.params_[name] = mat_from_json(j);
  for (const auto& [name, j] : in.at("adam").items()) {
    AdamState st;
    st.m = mat_from_json(j.at("m"));
    st.v = mat_from_json(j.at("v"));
    st.step = j.at("step").get<long>();
    store.adam_[name] = st;
  }
  return store;
}

void ParamStore::save(const std::string& path,
                      const std::string& config_json) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << to_json(config_json);
}

ParamStore ParamStore::load(const std::string& path, std::string* config_json) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str(), config_json);
}

bool ParamStore::operator==(const ParamStore& o) const {
  auto mats_equal = [](const Mat& a, const Mat& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  if (params_.size() != o.params_.size() || adam_.size() != o.adam_.size())
    return false;
  for (const auto& [name, p] : params_) {
    auto it = o.params_.find(name);
    if (it == o.params_.end() || !mats_equal(p, it->second)) return false;
  }
  for (const auto& [name, st] : adam_) {
    auto it = o.adam_.find(name);
    if (it == o.adam_.end() || st.step != it->second.step ||
        !mats_equal(st.m, it->second.m) || !mats_equal(st.v, it->second.v))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tape

Value* Tape::make(Mat val, bool requires_grad) {
  auto node = std::make_unique<Value>();
  node->val = std::move(val);
  node->requires_grad = requires_grad;
  node->order = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

void Tape::ensure_grad(Value* v) {
  if (v->grad.size() == 0) v->grad = Mat::Zero(v->val.rows(), v->val.cols());
}

Value* Tape::constant(const Mat& m) { return make(m, false); }

Value* Tape::param(ParamStore& store, const std::string& name) {
  Value* out = make(store.value(name), true);
  Mat* sink = &store.grad(name);
  out->backward_fn = [sink](Value& self) { *sink += self.grad; };
  return out;
}

Value* Tape::matmul(Value* a, Value* b) {
  if (a->val.cols() != b->val.rows()) dim_error("matmul", a->val, b->val);
  Value* out = make(a->val * b->val, a->requires_grad || b->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, b](Value& self) {
      if (a->requires_grad) {
        ensure_grad(a);
        a->grad += self.grad * b->val.transpose();
      }
      if (b->requires_grad) {
        ensure_grad(b);
        b->grad += a->val.transpose() * self.grad;
      }
    };
  return out;
}

Value* Tape::add(Value* a, Value* b) {
  if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols())
    dim_error("add", a->val, b->val);
  Value* out = make(a->val + b->val, a->requires_grad || b->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, b](Value& self) {
      for (Value* p : {a, b})
        if (p->requires_grad) {
          ensure_grad(p);
          p->grad += self.grad;
        }
    };
  return out;
}

Value* Tape::scale(Value* a, double s) {
  Value* out = make(a->val * s, a->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, s](Value& self) {
      ensure_grad(a);
      a->grad += self.grad * s;
    };
  return out;
}

Value* Tape::mul(Value* a, Value* b) {
  if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols())
    dim_error("mul", a->val, b->val);
  Value* out =
      make(a->val.cwiseProduct(b->val), a->requires_grad || b->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, b](Value& self) {
      if (a->requires_grad) {
        ensure_grad(a);
        a->grad += self.grad.cwiseProduct(b->val);
      }
      if (b->requires_grad) {
        ensure_grad(b);
        b->grad += self.grad.cwiseProduct(a->val);
      }
    };
  return out;
}

Value* Tape::concat_cols(const std::vector<Value*>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Eigen::Index rows = parts[0]->val.rows(), cols = 0;
  bool needs_grad = false;
  for (Value* p : parts) {
    if (p->val.rows() != rows) dim_error("concat_cols", parts[0]->val, p->val);
    cols += p->val.cols();
    needs_grad = needs_grad || p->requires_grad;
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (Value* p : parts) {
    v.middleCols(at, p->val.cols()) = p->val;
    at += p->val.cols();
  }
  Value* out = make(std::move(v), needs_grad);
  if (out->requires_grad) {
    std::vector<Value*> ps = parts;
    out->backward_fn = [ps](Value& self) {
      Eigen::Index at = 0;
      for (Value* p : ps) {
        if (p->requires_grad) {
          ensure_grad(p);
          p->grad += self.grad.middleCols(at, p->val.cols());
        }
        at += p->val.cols();
      }
    };
  }
  return out;
}

Value* Tape::concat_rows(const std::vector<Value*>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  Eigen::Index cols = parts[0]->val.cols(), rows = 0;
  bool needs_grad = false;
  for (Value* p : parts) {
    if (p->val.cols() != cols) dim_error("concat_rows", parts[0]->val, p->val);
    rows += p->val.rows();
    needs_grad = needs_grad || p->requires_grad;
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (Value* p : parts) {
    v.middleRows(at, p->val.rows()) = p->val;
    at += p->val.rows();
  }
  Value* out = make(std::move(v), needs_grad);
  if (out->requires_grad) {
    std::vector<Value*> ps = parts;
    out->backward_fn = [ps](Value& self) {
      Eigen::Index at = 0;
      for (Value* p : ps) {
        if (p->requires_grad) {
          ensure_grad(p);
          p->grad += self.grad.middleRows(at, p->val.rows());
        }
        at += p->val.rows();
      }
    };
  }
  return out;
}

Value* Tape::outer_rows(Value* a, Value* b) {
  if (a->val.rows() != b->val.rows()) dim_error("outer_rows", a->val, b->val);
  Eigen::Index n = a->val.rows(), p = a->val.cols(), q = b->val.cols();
  Mat v(n, p * q);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index i = 0; i < p; ++i)
      v.block(r, i * q, 1, q) = a->val(r, i) * b->val.row(r);
  Value* out = make(std::move(v), a->requires_grad || b->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, b, n, p, q](Value& self) {
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index i = 0; i < p; ++i) {
          if (a->requires_grad) {
            ensure_grad(a);
            a->grad(r, i) +=
                self.grad.block(r, i * q, 1, q).row(0).dot(b->val.row(r));
          }
          if (b->requires_grad) {
            ensure_grad(b);
            b->grad.row(r) += a->val(r, i) * self.grad.block(r, i * q, 1, q);
          }
        }
    };
  return out;
}

Value* Tape::rows(Value* table, const std::vector<int>& indices) {
  for (int i : indices)
    if (i < 0 || i >= table->val.rows())
      throw DimensionError("rows: index out of range");
  Mat v(static_cast<Eigen::Index>(indices.size()), table->val.cols());
  for (size_t k = 0; k < indices.size(); ++k)
    v.row(static_cast<Eigen::Index>(k)) = table->val.row(indices[k]);
  Value* out = make(std::move(v), table->requires_grad);
  if (out->requires_grad) {
    std::vector<int> idx = indices;
    out->backward_fn = [table, idx](Value& self) {
      ensure_grad(table);
      for (size_t k = 0; k < idx.size(); ++k)
        table->grad.row(idx[k]) += self.grad.row(static_cast<Eigen::Index>(k));
    };
  }
  return out;
}

Value* Tape::maxpool_rows(Value* a) {
  if (a->val.rows() == 0) throw DimensionError("maxpool_rows: empty input");
  Mat v = a->val.colwise().maxCoeff();
  // remember which row won each column (first maximal row on ties)
  std::vector<Eigen::Index> argmax(a->val.cols());
  for (Eigen::Index c = 0; c < a->val.cols(); ++c)
    a->val.col(c).maxCoeff(&argmax[static_cast<size_t>(c)]);
  Value* out = make(std::move(v), a->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, argmax](Value& self) {
      ensure_grad(a);
      for (Eigen::Index c = 0; c < a->val.cols(); ++c)
        a->grad(argmax[static_cast<size_t>(c)], c) += self.grad(0, c);
    };
  return out;
}

Value* Tape::affine(Value* x, Value* w, Value* b) {
  if (x->val.cols() != w->val.rows()) dim_error("affine", x->val, w->val);
  if (b->val.rows() != 1 || b->val.cols() != w->val.cols())
    dim_error("affine", w->val, b->val);
  Mat v = x->val * w->val;
  v.rowwise() += b->val.row(0);
  Value* out = make(std::move(v), x->requires_grad || w->requires_grad ||
                                      b->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [x, w, b](Value& self) {
      if (x->requires_grad) {
        ensure_grad(x);
        x->grad += self.grad * w->val.transpose();
      }
      if (w->requires_grad) {
        ensure_grad(w);
        w->grad += x->val.transpose() * self.grad;
      }
      if (b->requires_grad) {
        ensure_grad(b);
        b->grad.row(0) += self.grad.colwise().sum();
      }
    };
  return out;
}

Value* Tape::relu(Value* a) {
  Value* out = make(a->val.cwiseMax(0.0), a->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a](Value& self) {
      ensure_grad(a);
      a->grad.array() +=
          self.grad.array() * (a->val.array() > 0.0).cast<double>();
    };
  return out;
}

Value* Tape::dropout(Value* a, double rate, bool train, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw DimensionError("dropout: rate must be in [0, 1)");
  if (!train || rate == 0.0) return a;
  double keep = 1.0 - rate;
  Mat mask(a->val.rows(), a->val.cols());
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = dist(rng) < keep ? 1.0 / keep : 0.0;
  Value* out = make(a->val.cwiseProduct(mask), a->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, mask](Value& self) {
      ensure_grad(a);
      a->grad += self.grad.cwiseProduct(mask);
    };
  return out;
}

Value* Tape::softmax_rows(Value* a) {
  Mat v(a->val.rows(), a->val.cols());
  for (Eigen::Index r = 0; r < a->val.rows(); ++r) {
    Eigen::ArrayXd row = a->val.row(r).array();
    row -= row.maxCoeff();
    Eigen::ArrayXd e = row.exp();
    v.row(r) = (e / e.sum()).matrix().transpose();
  }
  Value* out = make(std::move(v), a->requires_grad);
  if (out->requires_grad) {
    Mat probs = out->val;
    out->backward_fn = [a, probs](Value& self) {
      ensure_grad(a);
      for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        double dot = self.grad.row(r).dot(probs.row(r));
        a->grad.row(r).array() +=
            probs.row(r).array() * (self.grad.row(r).array() - dot);
      }
    };
  }
  return out;
}

Value* Tape::nll_loss(Value* probs, const std::vector<int>& targets) {
  if (static_cast<Eigen::Index>(targets.size()) != probs->val.rows())
    throw DimensionError("nll_loss: one target per row required");
  for (int t : targets)
    if (t < 0 || t >= probs->val.cols())
      throw DimensionError("nll_loss: target class out of range");
  constexpr double kProbFloor = 1e-12;  // guards log(0)
  double total = 0.0;
  for (size_t i = 0; i < targets.size(); ++i)
    total -= std::log(std::max(
        probs->val(static_cast<Eigen::Index>(i), targets[i]), kProbFloor));
  double n = static_cast<double>(targets.size());
  Value* out = make(Mat::Constant(1, 1, total / n), probs->requires_grad);
  if (out->requires_grad) {
    std::vector<int> tgt = targets;
    out->backward_fn = [probs, tgt, n](Value& self) {
      ensure_grad(probs);
      double g = self.grad(0, 0) / n;
      for (size_t i = 0; i < tgt.size(); ++i) {
        Eigen::Index r = static_cast<Eigen::Index>(i);
        double p = std::max(probs->val(r, tgt[i]), 1e-12);
        probs->grad(r, tgt[i]) -= g / p;
      }
    };
  }
  return out;
}

Value* Tape::bilinear(Value* a, Value* w, Value* b) {
  if (a->val.rows() != 1 || b->val.rows() != 1)
    throw DimensionError("bilinear: operands must be row vectors");
  Eigen::Index p = a->val.cols(), q = b->val.cols();
  if (w->val.cols() != p * q) dim_error("bilinear", a->val, w->val);
  Eigen::Index k = w->val.rows();
  // row r of w holds the r-th p x q form row-major: W_r(i, j) = w(r, i*q + j)
  auto form = [p, q](const Mat& m, Eigen::Index r) {
    Mat wr(p, q);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < q; ++j) wr(i, j) = m(r, i * q + j);
    return wr;
  };
  Mat v(1, k);
  for (Eigen::Index r = 0; r < k; ++r)
    v(0, r) = a->val.row(0) * form(w->val, r) * b->val.row(0).transpose();
  Value* out =
      make(std::move(v),
           a->requires_grad || w->requires_grad || b->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a, w, b, p, q, k, form](Value& self) {
      for (Eigen::Index r = 0; r < k; ++r) {
        double g = self.grad(0, r);
        if (g == 0.0) continue;
        Mat wr = form(w->val, r);
        if (a->requires_grad) {
          ensure_grad(a);
          a->grad.row(0) += g * (wr * b->val.row(0).transpose()).transpose();
        }
        if (b->requires_grad) {
          ensure_grad(b);
          b->grad.row(0) += g * (a->val.row(0) * wr);
        }
        if (w->requires_grad) {
          ensure_grad(w);
          for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < q; ++j)
              w->grad(r, i * q + j) += g * a->val(0, i) * b->val(0, j);
        }
      }
    };
  return out;
}

Value* Tape::sum_all(Value* a) {
  Value* out = make(Mat::Constant(1, 1, a->val.sum()), a->requires_grad);
  if (out->requires_grad)
    out->backward_fn = [a](Value& self) {
      ensure_grad(a);
      a->grad.array() += self.grad(0, 0);
    };
  return out;
}

void Tape::backward(Value* root) {
  if (root->val.rows() != 1 || root->val.cols() != 1)
    throw DimensionError("backward: root must be scalar");
  ensure_grad(root);
  root->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Value& node = **it;
    if (node.order > root->order) continue;
    if (node.grad.size() != 0 && node.backward_fn) node.backward_fn(node);
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification

double grad_check(const std::function<double(ParamStore&)>& f,
                  ParamStore& store, double epsilon, int n_coords,
                  uint64_t seed) {
  store.zero_grads();
  f(store);  // records analytic gradients

  struct Coord {
    std::string name;
    Eigen::Index flat;
  };
  std::vector<Coord> all;
  for (const auto& name : store.names()) {
    const Mat& p = store.value(name);
    for (Eigen::Index i = 0; i < p.size(); ++i) all.push_back({name, i});
  }
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  if (static_cast<int>(all.size()) > n_coords) all.resize(n_coords);

  // snapshot analytic grads before FD probing overwrites them
  std::map<std::string, Mat> analytic;
  for (const auto& name : store.names()) analytic[name] = store.grad(name);

  double max_rel = 0.0;
  for (const auto& c : all) {
    double* slot = store.value(c.name).data() + c.flat;
    double orig = *slot;
    *slot = orig + epsilon;
    store.zero_grads();
    double up = f(store);
    *slot = orig - epsilon;
    store.zero_grads();
    double down = f(store);
    *slot = orig;
    double fd = (up - down) / (2.0 * epsilon);
    double an = analytic[c.name].data()[c.flat];
    double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
    max_rel = std::max(max_rel, rel);
  }
  store.zero_grads();
  for (const auto& [name, g] : analytic) store.grad(name) = g;
  return max_rel;
}

}  // namespace ee
