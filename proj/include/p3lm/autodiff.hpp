#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "p3lm/array.hpp"
#include "p3lm/errors.hpp"
#include "p3lm/rng.hpp"

namespace p3lm {

// A named trainable tensor. Gradients live next to the values and are
// accumulated by TapeT::backward; the optimizer zeroes them after each step.
template <typename T>
struct ParamT {
  std::string name;
  ArrayT<T> value;
  ArrayT<T> grad;
};

template <typename T>
class ParamStoreT {
 public:
  int add(std::string name, ArrayT<T> init) {
    if (index_.count(name)) throw ConsistencyError("ParamStore: duplicate parameter " + name);
    int id = static_cast<int>(items_.size());
    ParamT<T> p;
    p.name = std::move(name);
    p.grad = ArrayT<T>(init.shape);
    p.value = std::move(init);
    index_[p.name] = id;
    items_.push_back(std::move(p));
    return id;
  }

  int size() const { return static_cast<int>(items_.size()); }
  ParamT<T>& at(int id) { return items_.at(static_cast<std::size_t>(id)); }
  const ParamT<T>& at(int id) const { return items_.at(static_cast<std::size_t>(id)); }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  ParamT<T>& by_name(const std::string& name) {
    int id = find(name);
    if (id < 0) throw ConsistencyError("ParamStore: no parameter named " + name);
    return at(id);
  }
  const ParamT<T>& by_name(const std::string& name) const {
    int id = find(name);
    if (id < 0) throw ConsistencyError("ParamStore: no parameter named " + name);
    return at(id);
  }

  void zero_grads() {
    for (auto& p : items_) std::fill(p.grad.v.begin(), p.grad.v.end(), T(0));
  }

  std::int64_t value_count() const {
    std::int64_t n = 0;
    for (const auto& p : items_) n += p.value.size();
    return n;
  }

  template <typename U>
  ParamStoreT<U> cast() const {
    ParamStoreT<U> out;
    for (const auto& p : items_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<ParamT<T>> items_;
  std::unordered_map<std::string, int> index_;
};

using ParamStore = ParamStoreT<float>;

template <typename T>
class TapeT;

// Handle to a tape node; cheap to copy, valid while the tape lives.
template <typename T>
struct VarT {
  TapeT<T>* tape = nullptr;
  int id = -1;
  const ArrayT<T>& val() const;
};

// Reverse-mode tape. Nodes are appended in creation order, which is a valid
// topological order (every parent id < child id), so the backward sweep is a
// single reverse walk seeded at the requested scalar root.
template <typename T>
class TapeT {
 public:
  struct Node {
    ArrayT<T> val;
    ArrayT<T> grad;  // allocated by backward()
    std::function<void(TapeT&)> bw;
    const char* op = "leaf";
    int param_id = -1;
  };

  explicit TapeT(ParamStoreT<T>* params = nullptr, bool check_finite = true)
      : params_(params), check_finite_(check_finite) {}

  VarT<T> leaf(ArrayT<T> value, const char* op = "leaf") {
    return VarT<T>{this, add_node(std::move(value), op, -1)};
  }

  // Leaf view of a stored parameter. Repeated requests for the same id reuse
  // one node so its gradient is accumulated once per backward pass.
  VarT<T> param(int pid) {
    if (!params_) throw ConsistencyError("TapeT::param: tape has no parameter store");
    auto it = param_nodes_.find(pid);
    if (it != param_nodes_.end()) return VarT<T>{this, it->second};
    int id = add_node(params_->at(pid).value, "param", pid);
    param_nodes_[pid] = id;
    return VarT<T>{this, id};
  }
  VarT<T> param(const std::string& name) {
    if (!params_) throw ConsistencyError("TapeT::param: tape has no parameter store");
    int pid = params_->find(name);
    if (pid < 0) throw ConsistencyError("TapeT::param: no parameter named " + name);
    return param(pid);
  }

  // Seeds d(root)/d(root) = 1 and walks the tape in reverse creation order.
  // Parameter gradients are accumulated (+=) into the bound store.
  void backward(VarT<T> root) {
    if (root.tape != this) throw ConsistencyError("backward: root from another tape");
    if (node(root.id).val.size() != 1) throw ShapeError("backward: root must be a scalar");
    for (int i = 0; i <= root.id; ++i) {
      Node& n = node(i);
      n.grad = ArrayT<T>(n.val.shape);
    }
    node(root.id).grad[0] = T(1);
    for (int i = root.id; i >= 0; --i) {
      Node& n = node(i);
      if (n.bw) n.bw(*this);
    }
    if (params_) {
      for (int i = 0; i <= root.id; ++i) {
        Node& n = node(i);
        if (n.param_id >= 0) add_into(params_->at(n.param_id).grad, n.grad);
      }
    }
  }

  int add_node(ArrayT<T> val, const char* op, int param_id = -1) {
    if (check_finite_) {
      for (std::int64_t i = 0; i < val.size(); ++i) {
        if (!std::isfinite(static_cast<double>(val[i])))
          throw NumericError(op, "non-finite output at flat index " + std::to_string(i));
      }
    }
    Node n;
    n.val = std::move(val);
    n.op = op;
    n.param_id = param_id;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t node_count() const { return nodes_.size(); }
  ParamStoreT<T>* params() { return params_; }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
  ParamStoreT<T>* params_;
  bool check_finite_;
};

template <typename T>
const ArrayT<T>& VarT<T>::val() const {
  return tape->node(id).val;
}

namespace detail {
template <typename T>
TapeT<T>& same_tape(VarT<T> a, VarT<T> b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ConsistencyError(std::string(op) + ": operands from different tapes");
  return *a.tape;
}

// Appends a node and then binds its backward closure, which may capture the
// freshly assigned id (needed to read the node's own output gradient).
template <typename T, typename MakeBw>
VarT<T> emit(TapeT<T>& t, ArrayT<T> val, const char* op, MakeBw&& make_bw) {
  int id = t.add_node(std::move(val), op);
  t.node(id).bw = make_bw(id);
  return VarT<T>{&t, id};
}
}  // namespace detail

// ---- ops ------------------------------------------------------------------

template <typename T>
VarT<T> add(VarT<T> a, VarT<T> b) {
  TapeT<T>& t = detail::same_tape(a, b, "add");
  if (!a.val().same_shape(b.val()))
    throw ShapeError("add: shape mismatch " + a.val().shape_str() + " vs " + b.val().shape_str());
  ArrayT<T> out = a.val();
  add_into(out, b.val());
  int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(out), "add", [ai, bi](int id) {
    return [ai, bi, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      add_into(tp.node(ai).grad, g);
      add_into(tp.node(bi).grad, g);
    };
  });
}

template <typename T>
VarT<T> scale(VarT<T> a, T c) {
  TapeT<T>& t = *a.tape;
  ArrayT<T> out = a.val();
  for (auto& x : out.v) x *= c;
  int ai = a.id;
  return detail::emit(t, std::move(out), "scale", [ai, c](int id) {
    return [ai, c, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& da = tp.node(ai).grad;
      for (std::int64_t i = 0; i < g.size(); ++i) da[i] += c * g[i];
    };
  });
}

// (R x C) + rank-1 (C), broadcast over rows.
template <typename T>
VarT<T> add_rowvec(VarT<T> m, VarT<T> row) {
  TapeT<T>& t = detail::same_tape(m, row, "add_rowvec");
  const ArrayT<T>& mv = m.val();
  const ArrayT<T>& rv = row.val();
  if (mv.rank() != 2 || rv.rank() != 1 || rv.shape[0] != mv.cols())
    throw ShapeError("add_rowvec: shapes " + mv.shape_str() + " + " + rv.shape_str());
  ArrayT<T> out = mv;
  const std::int64_t R = mv.rows(), C = mv.cols();
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < C; ++c) out.at(r, c) += rv[c];
  int mi = m.id, ri = row.id;
  return detail::emit(t, std::move(out), "add_rowvec", [mi, ri, R, C](int id) {
    return [mi, ri, R, C, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      add_into(tp.node(mi).grad, g);
      ArrayT<T>& dr = tp.node(ri).grad;
      for (std::int64_t r = 0; r < R; ++r)
        for (std::int64_t c = 0; c < C; ++c) dr[c] += g.at(r, c);
    };
  });
}

template <typename T>
VarT<T> matmul(VarT<T> a, VarT<T> b) {
  TapeT<T>& t = detail::same_tape(a, b, "matmul");
  ArrayT<T> out = matmul_nn(a.val(), b.val());
  int ai = a.id, bi = b.id;
  return detail::emit(t, std::move(out), "matmul", [ai, bi](int id) {
    return [ai, bi, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      add_into(tp.node(ai).grad, matmul_nt(g, tp.node(bi).val));
      add_into(tp.node(bi).grad, matmul_tn(tp.node(ai).val, g));
    };
  });
}

template <typename T>
VarT<T> transpose(VarT<T> a) {
  TapeT<T>& t = *a.tape;
  ArrayT<T> out = transpose2d(a.val());
  int ai = a.id;
  return detail::emit(t, std::move(out), "transpose", [ai](int id) {
    return [ai, id](TapeT<T>& tp) {
      add_into(tp.node(ai).grad, transpose2d(tp.node(id).grad));
    };
  });
}

template <typename T>
VarT<T> concat_rows(const std::vector<VarT<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  TapeT<T>& t = *parts[0].tape;
  const std::int64_t C = parts[0].val().cols();
  std::int64_t R = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p, "concat_rows");
    if (p.val().cols() != C) throw ShapeError("concat_rows: column mismatch");
    R += p.val().rows();
  }
  ArrayT<T> out({R, C});
  std::vector<int> ids;
  std::vector<std::int64_t> offs;
  std::int64_t r0 = 0;
  for (const auto& p : parts) {
    const ArrayT<T>& pv = p.val();
    std::copy(pv.v.begin(), pv.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(r0 * C));
    ids.push_back(p.id);
    offs.push_back(r0);
    r0 += pv.rows();
  }
  return detail::emit(t, std::move(out), "concat_rows", [ids, offs, C](int id) {
    return [ids, offs, C, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        ArrayT<T>& dp = tp.node(ids[k]).grad;
        const std::int64_t n = dp.size();
        const T* src = &g.v[static_cast<std::size_t>(offs[k] * C)];
        for (std::int64_t i = 0; i < n; ++i) dp[i] += src[i];
      }
    };
  });
}

template <typename T>
VarT<T> slice_rows(VarT<T> a, std::int64_t r0, std::int64_t nrows) {
  TapeT<T>& t = *a.tape;
  const ArrayT<T>& av = a.val();
  if (av.rank() != 2 || r0 < 0 || nrows < 1 || r0 + nrows > av.rows())
    throw ShapeError("slice_rows: bad range on " + av.shape_str());
  const std::int64_t C = av.cols();
  ArrayT<T> out({nrows, C});
  std::copy_n(av.v.begin() + static_cast<std::ptrdiff_t>(r0 * C), nrows * C, out.v.begin());
  int ai = a.id;
  return detail::emit(t, std::move(out), "slice_rows", [ai, r0, C](int id) {
    return [ai, r0, C, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& da = tp.node(ai).grad;
      T* dst = &da.v[static_cast<std::size_t>(r0 * C)];
      for (std::int64_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    };
  });
}

template <typename T>
VarT<T> concat_cols(const std::vector<VarT<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  TapeT<T>& t = *parts[0].tape;
  const std::int64_t R = parts[0].val().rows();
  std::int64_t C = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p, "concat_cols");
    if (p.val().rows() != R) throw ShapeError("concat_cols: row mismatch");
    C += p.val().cols();
  }
  ArrayT<T> out({R, C});
  std::vector<int> ids;
  std::vector<std::int64_t> offs, widths;
  std::int64_t c0 = 0;
  for (const auto& p : parts) {
    const ArrayT<T>& pv = p.val();
    const std::int64_t w = pv.cols();
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t c = 0; c < w; ++c) out.at(r, c0 + c) = pv.at(r, c);
    ids.push_back(p.id);
    offs.push_back(c0);
    widths.push_back(w);
    c0 += w;
  }
  return detail::emit(t, std::move(out), "concat_cols", [ids, offs, widths, R](int id) {
    return [ids, offs, widths, R, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        ArrayT<T>& dp = tp.node(ids[k]).grad;
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t c = 0; c < widths[k]; ++c) dp.at(r, c) += g.at(r, offs[k] + c);
      }
    };
  });
}

template <typename T>
VarT<T> slice_cols(VarT<T> a, std::int64_t c0, std::int64_t ncols) {
  TapeT<T>& t = *a.tape;
  const ArrayT<T>& av = a.val();
  if (av.rank() != 2 || c0 < 0 || ncols < 1 || c0 + ncols > av.cols())
    throw ShapeError("slice_cols: bad range on " + av.shape_str());
  const std::int64_t R = av.rows();
  ArrayT<T> out({R, ncols});
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < ncols; ++c) out.at(r, c) = av.at(r, c0 + c);
  int ai = a.id;
  return detail::emit(t, std::move(out), "slice_cols", [ai, c0, R, ncols](int id) {
    return [ai, c0, R, ncols, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& da = tp.node(ai).grad;
      for (std::int64_t r = 0; r < R; ++r)
        for (std::int64_t c = 0; c < ncols; ++c) da.at(r, c0 + c) += g.at(r, c);
    };
  });
}

// Softmax over rows with hard exclusion: excluded positions get -1e9 added to
// their score before the shifted exp, which underflows to an exact 0.0 weight.
// The row maximum always comes from an included position, so included weights
// are computed exactly as if the excluded columns did not exist.
template <typename T>
VarT<T> masked_softmax(VarT<T> scores, const MaskMatrix& mask) {
  TapeT<T>& t = *scores.tape;
  const ArrayT<T>& s = scores.val();
  if (s.rank() != 2 || mask.rank() != 2 || s.shape != mask.shape)
    throw ShapeError("masked_softmax: scores " + s.shape_str() + " vs mask " + mask.shape_str());
  const std::int64_t R = s.rows(), C = s.cols();
  auto out = std::make_shared<ArrayT<T>>(std::vector<std::int64_t>{R, C});
  constexpr T kExclude = T(-1e9);
  for (std::int64_t r = 0; r < R; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::int64_t c = 0; c < C; ++c) {
      if (mask.at(r, c)) {
        any = true;
        mx = std::max(mx, s.at(r, c));
      }
    }
    if (!any) throw MaskError("masked_softmax: fully masked row " + std::to_string(r));
    T z = T(0);
    for (std::int64_t c = 0; c < C; ++c) {
      T shifted = s.at(r, c) + (mask.at(r, c) ? T(0) : kExclude) - mx;
      T e = std::exp(shifted);
      out->at(r, c) = e;
      z += e;
    }
    for (std::int64_t c = 0; c < C; ++c) out->at(r, c) /= z;
  }
  int si = scores.id;
  ArrayT<T> val = *out;
  return detail::emit(t, std::move(val), "masked_softmax", [si, out, R, C](int id) {
    return [si, out, R, C, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& ds = tp.node(si).grad;
      const ArrayT<T>& p = *out;
      for (std::int64_t r = 0; r < R; ++r) {
        T dot = T(0);
        for (std::int64_t c = 0; c < C; ++c) dot += g.at(r, c) * p.at(r, c);
        for (std::int64_t c = 0; c < C; ++c)
          ds.at(r, c) += p.at(r, c) * (g.at(r, c) - dot);
      }
    };
  });
}

// Per-row layer normalization with learned gain/bias (both rank-1, length C).
template <typename T>
VarT<T> layer_norm(VarT<T> x, VarT<T> gain, VarT<T> bias, T eps) {
  TapeT<T>& t = detail::same_tape(x, gain, "layer_norm");
  detail::same_tape(x, bias, "layer_norm");
  const ArrayT<T>& xv = x.val();
  const ArrayT<T>& gv = gain.val();
  const ArrayT<T>& bv = bias.val();
  if (xv.rank() != 2 || gv.rank() != 1 || bv.rank() != 1 || gv.shape[0] != xv.cols() ||
      bv.shape[0] != xv.cols())
    throw ShapeError("layer_norm: shapes " + xv.shape_str() + ", " + gv.shape_str() + ", " +
                     bv.shape_str());
  const std::int64_t R = xv.rows(), C = xv.cols();
  auto xhat = std::make_shared<ArrayT<T>>(std::vector<std::int64_t>{R, C});
  auto inv_sd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(R));
  ArrayT<T> out({R, C});
  for (std::int64_t r = 0; r < R; ++r) {
    T mu = T(0);
    for (std::int64_t c = 0; c < C; ++c) mu += xv.at(r, c);
    mu /= static_cast<T>(C);
    T var = T(0);
    for (std::int64_t c = 0; c < C; ++c) {
      T d = xv.at(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<T>(C);
    T isd = T(1) / std::sqrt(var + eps);
    (*inv_sd)[static_cast<std::size_t>(r)] = isd;
    for (std::int64_t c = 0; c < C; ++c) {
      T xh = (xv.at(r, c) - mu) * isd;
      xhat->at(r, c) = xh;
      out.at(r, c) = xh * gv[c] + bv[c];
    }
  }
  int xi = x.id, gi = gain.id, bi = bias.id;
  return detail::emit(t, std::move(out), "layer_norm", [=](int id) {
    return [=](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      const ArrayT<T>& gainv = tp.node(gi).val;
      ArrayT<T>& dx = tp.node(xi).grad;
      ArrayT<T>& dg = tp.node(gi).grad;
      ArrayT<T>& db = tp.node(bi).grad;
      for (std::int64_t r = 0; r < R; ++r) {
        const T isd = (*inv_sd)[static_cast<std::size_t>(r)];
        T sum_dxh = T(0), sum_dxh_xh = T(0);
        for (std::int64_t c = 0; c < C; ++c) {
          const T xh = xhat->at(r, c);
          const T go = g.at(r, c);
          const T dxh = go * gainv[c];
          sum_dxh += dxh;
          sum_dxh_xh += dxh * xh;
          dg[c] += go * xh;
          db[c] += go;
        }
        const T n = static_cast<T>(C);
        for (std::int64_t c = 0; c < C; ++c) {
          const T xh = xhat->at(r, c);
          const T dxh = g.at(r, c) * gainv[c];
          dx.at(r, c) += isd * (dxh - sum_dxh / n - xh * sum_dxh_xh / n);
        }
      }
    };
  });
}

// Gathers rows of a (table) by index; out row r = table row ids[r].
template <typename T>
VarT<T> embedding_rows(VarT<T> table, std::vector<int> ids) {
  TapeT<T>& t = *table.tape;
  const ArrayT<T>& tv = table.val();
  if (tv.rank() != 2) throw ShapeError("embedding_rows: table must be rank 2");
  const std::int64_t R = static_cast<std::int64_t>(ids.size()), C = tv.cols();
  if (R < 1) throw ShapeError("embedding_rows: empty id list");
  for (int i : ids)
    if (i < 0 || i >= tv.rows())
      throw ShapeError("embedding_rows: id " + std::to_string(i) + " out of range for " +
                       tv.shape_str());
  ArrayT<T> out({R, C});
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < C; ++c)
      out.at(r, c) = tv.at(ids[static_cast<std::size_t>(r)], c);
  int ti = table.id;
  auto idx = std::make_shared<std::vector<int>>(std::move(ids));
  return detail::emit(t, std::move(out), "embedding_rows", [ti, idx, C](int id) {
    return [ti, idx, C, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& dt = tp.node(ti).grad;
      for (std::size_t r = 0; r < idx->size(); ++r)
        for (std::int64_t c = 0; c < C; ++c)
          dt.at((*idx)[r], c) += g.at(static_cast<std::int64_t>(r), c);
    };
  });
}

// Exact GELU: x * Phi(x), with Phi the standard normal CDF.
template <typename T>
VarT<T> gelu(VarT<T> x) {
  TapeT<T>& t = *x.tape;
  const ArrayT<T>& xv = x.val();
  ArrayT<T> out = xv;
  for (auto& v : out.v) {
    double xd = static_cast<double>(v);
    v = static_cast<T>(xd * 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2)));
  }
  int xi = x.id;
  return detail::emit(t, std::move(out), "gelu", [xi](int id) {
    return [xi, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      const ArrayT<T>& xv2 = tp.node(xi).val;
      ArrayT<T>& dx = tp.node(xi).grad;
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (std::int64_t i = 0; i < g.size(); ++i) {
        double xd = static_cast<double>(xv2[i]);
        double phi = 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2));
        double pdf = inv_sqrt_2pi * std::exp(-0.5 * xd * xd);
        dx[i] += g[i] * static_cast<T>(phi + xd * pdf);
      }
    };
  });
}

// Inverted dropout on elements; keep probability 1-p, kept values scaled by
// 1/(1-p). Draws one uniform per element in row-major order from the stream.
template <typename T>
VarT<T> dropout(VarT<T> x, double p, RngStream& rng) {
  if (p == 0.0) return x;
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
  TapeT<T>& t = *x.tape;
  const ArrayT<T>& xv = x.val();
  auto keep = std::make_shared<std::vector<std::uint8_t>>(xv.v.size());
  ArrayT<T> out = xv;
  const T inv_keep = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    bool k = rng.next_double() >= p;
    (*keep)[i] = k ? 1 : 0;
    out.v[i] = k ? out.v[i] * inv_keep : T(0);
  }
  int xi = x.id;
  return detail::emit(t, std::move(out), "dropout", [xi, keep, inv_keep](int id) {
    return [xi, keep, inv_keep, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& dx = tp.node(xi).grad;
      for (std::int64_t i = 0; i < g.size(); ++i)
        if ((*keep)[static_cast<std::size_t>(i)]) dx[i] += g[i] * inv_keep;
    };
  });
}

// Per-row negative log-likelihood of the target column under a softmax of the
// logits. Returns a rank-1 array of length R (one NLL per row).
template <typename T>
VarT<T> nll_rows(VarT<T> logits, std::vector<int> targets) {
  TapeT<T>& t = *logits.tape;
  const ArrayT<T>& lv = logits.val();
  if (lv.rank() != 2) throw ShapeError("nll_rows: logits must be rank 2");
  const std::int64_t R = lv.rows(), C = lv.cols();
  if (static_cast<std::int64_t>(targets.size()) != R)
    throw ShapeError("nll_rows: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(R) + " rows");
  for (int y : targets)
    if (y < 0 || y >= C) throw ShapeError("nll_rows: target id out of range");
  auto probs = std::make_shared<ArrayT<T>>(std::vector<std::int64_t>{R, C});
  ArrayT<T> out({R});
  for (std::int64_t r = 0; r < R; ++r) {
    T mx = lv.at(r, 0);
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, lv.at(r, c));
    T z = T(0);
    for (std::int64_t c = 0; c < C; ++c) {
      T e = std::exp(lv.at(r, c) - mx);
      probs->at(r, c) = e;
      z += e;
    }
    for (std::int64_t c = 0; c < C; ++c) probs->at(r, c) /= z;
    const int y = targets[static_cast<std::size_t>(r)];
    out[r] = std::log(z) + mx - lv.at(r, y);
  }
  int li = logits.id;
  auto tg = std::make_shared<std::vector<int>>(std::move(targets));
  return detail::emit(t, std::move(out), "nll_rows", [li, probs, tg, R, C](int id) {
    return [li, probs, tg, R, C, id](TapeT<T>& tp) {
      const ArrayT<T>& g = tp.node(id).grad;
      ArrayT<T>& dl = tp.node(li).grad;
      for (std::int64_t r = 0; r < R; ++r) {
        const T gr = g[r];
        if (gr == T(0)) continue;
        const int y = (*tg)[static_cast<std::size_t>(r)];
        for (std::int64_t c = 0; c < C; ++c) dl.at(r, c) += gr * probs->at(r, c);
        dl.at(r, y) -= gr;
      }
    };
  });
}

// Scalar cross-entropy of a single distribution: logits rank-1 (C) or (1 x C).
template <typename T>
VarT<T> cross_entropy_from_logits(VarT<T> logits, int target) {
  TapeT<T>& t = *logits.tape;
  VarT<T> rows2d = logits;
  const ArrayT<T>& lv = logits.val();
  if (lv.rank() == 1) {
    // reshape through a 1-row view: emit a cheap alias node
    ArrayT<T> v = lv;
    v.shape = {1, lv.shape[0]};
    int li = logits.id;
    rows2d = detail::emit(t, std::move(v), "rowview", [li](int id) {
      return [li, id](TapeT<T>& tp) {
        const ArrayT<T>& g = tp.node(id).grad;
        ArrayT<T>& dl = tp.node(li).grad;
        for (std::int64_t i = 0; i < g.size(); ++i) dl[i] += g[i];
      };
    });
  } else if (lv.rank() != 2 || lv.rows() != 1) {
    throw ShapeError("cross_entropy_from_logits: want rank-1 or single-row logits");
  }
  VarT<T> nll = nll_rows(rows2d, std::vector<int>{target});
  return sum_all(nll);
}

// Sum of all elements -> scalar (shape {1}).
template <typename T>
VarT<T> sum_all(VarT<T> x) {
  TapeT<T>& t = *x.tape;
  const ArrayT<T>& xv = x.val();
  ArrayT<T> out({1});
  T s = T(0);
  for (std::int64_t i = 0; i < xv.size(); ++i) s += xv[i];
  out[0] = s;
  int xi = x.id;
  return detail::emit(t, std::move(out), "sum_all", [xi](int id) {
    return [xi, id](TapeT<T>& tp) {
      const T g = tp.node(id).grad[0];
      ArrayT<T>& dx = tp.node(xi).grad;
      for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += g;
    };
  });
}

// ---- finite-difference gradient checking -----------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::int64_t coords_checked = 0;
  std::string worst_coord;
};

// Central finite differences against the tape gradient. loss_fn must build the
// scalar loss on the given tape from the given store's current values.
// Relative error uses a unit floor: |a - n| / max(|a|, |n|, 1).
template <typename T, typename LossFn>
GradCheckReport grad_check(ParamStoreT<T>& params, LossFn&& loss_fn, double step,
                           int coords_per_param, RngStream& rng) {
  params.zero_grads();
  {
    TapeT<T> tape(&params);
    VarT<T> loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::vector<ArrayT<T>> analytic;
  analytic.reserve(static_cast<std::size_t>(params.size()));
  for (int p = 0; p < params.size(); ++p) analytic.push_back(params.at(p).grad);
  params.zero_grads();

  auto eval = [&]() -> double {
    TapeT<T> tape(&params);
    VarT<T> loss = loss_fn(tape);
    return static_cast<double>(loss.val()[0]);
  };

  GradCheckReport rep;
  for (int p = 0; p < params.size(); ++p) {
    ParamT<T>& par = params.at(p);
    const std::int64_t n = par.value.size();
    std::vector<std::int64_t> coords;
    if (n <= coords_per_param) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int k = 0; k < coords_per_param; ++k)
        coords.push_back(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n))));
    }
    for (std::int64_t i : coords) {
      const T saved = par.value[i];
      par.value[i] = saved + static_cast<T>(step);
      const double f_plus = eval();
      par.value[i] = saved - static_cast<T>(step);
      const double f_minus = eval();
      par.value[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double a = static_cast<double>(analytic[static_cast<std::size_t>(p)][i]);
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_coord = par.name + "[" + std::to_string(i) + "] analytic=" +
                          std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return rep;
}

}  // namespace p3lm
