#include "kalm/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kalm/errors.hpp"
#include "kalm/num/random.hpp"
#include "node.hpp"

namespace kalm::num {

using detail::Access;
using detail::make_result;
using detail::Node;

namespace {

Node& node_of(const Tensor& t) {
  const auto& n = Access::node(t);
  if (!n) throw StateError("use of an undefined tensor");
  return *n;
}

void require_matrix(const Tensor& t, const char* op) {
  if (node_of(t).shape.size() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Parent node pointer captured by backward closures. Safe because the child
// keeps parents alive through Node::parents while backward_fn exists.
Node* raw(const Tensor& t) { return Access::node(t).get(); }

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  const auto& xv = node_of(x).value;
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Node* xp = raw(x);
  return make_result(x.shape(), std::move(out), {x}, [xp, dfdx](Node& self) {
    if (!xp->requires_grad) return;
    double* gx = xp->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * dfdx(xp->value[i], self.value[i]);
  });
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  if (axis < -r || axis >= r) throw DimensionError("axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout layout(const Shape& s, std::size_t axis) {
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  l.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(a.shape()) + " · " +
                         shape_string(b.shape()));
  }
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Node* ap = raw(a);
  Node* bp = raw(b);
  return make_result({m, n}, std::move(out), {a, b}, [ap, bp, m, k, n](Node& self) {
    const double* g = self.grad.data();
    if (ap->requires_grad) {
      double* ga = ap->ensure_grad();
      const double* bv = bp->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g + i * n;
          const double* brow = bv + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (bp->requires_grad) {
      double* gb = bp->ensure_grad();
      const double* av = ap->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_matrix(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  const auto& xv = node_of(x).value;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  Node* xp = raw(x);
  return make_result({n, m}, std::move(out), {x}, [xp, m, n](Node& self) {
    double* gx = xp->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Node* ap = raw(a);
  Node* bp = raw(b);
  return make_result(a.shape(), std::move(out), {a, b}, [ap, bp](Node& self) {
    for (Node* p : {ap, bp}) {
      if (!p->requires_grad) continue;
      double* g = p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Node* ap = raw(a);
  Node* bp = raw(b);
  return make_result(a.shape(), std::move(out), {a, b}, [ap, bp](Node& self) {
    if (ap->requires_grad) {
      double* g = ap->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (bp->requires_grad) {
      double* g = bp->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = node_of(a).value;
  const auto& bv = node_of(b).value;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Node* ap = raw(a);
  Node* bp = raw(b);
  return make_result(a.shape(), std::move(out), {a, b}, [ap, bp](Node& self) {
    if (ap->requires_grad) {
      double* g = ap->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bp->value[i];
    }
    if (bp->requires_grad) {
      double* g = bp->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * ap->value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_matrix(x, "add_row");
  require_matrix(row, "add_row");
  const std::size_t m = x.rows(), n = x.cols();
  if (row.rows() != 1 || row.cols() != n) {
    throw DimensionError("add_row: " + shape_string(row.shape()) + " cannot broadcast over " +
                         shape_string(x.shape()));
  }
  const auto& xv = node_of(x).value;
  const auto& rv = node_of(row).value;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + rv[j];
  Node* xp = raw(x);
  Node* rp = raw(row);
  return make_result(x.shape(), std::move(out), {x, row}, [xp, rp, m, n](Node& self) {
    if (xp->requires_grad) {
      double* g = xp->ensure_grad();
      for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[i];
    }
    if (rp->requires_grad) {
      double* g = rp->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor mul_col(const Tensor& x, const Tensor& col) {
  require_matrix(x, "mul_col");
  require_matrix(col, "mul_col");
  const std::size_t m = x.rows(), n = x.cols();
  if (col.rows() != m || col.cols() != 1) {
    throw DimensionError("mul_col: " + shape_string(col.shape()) + " cannot broadcast over " +
                         shape_string(x.shape()));
  }
  const auto& xv = node_of(x).value;
  const auto& cv = node_of(col).value;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * cv[i];
  Node* xp = raw(x);
  Node* cp = raw(col);
  return make_result(x.shape(), std::move(out), {x, col}, [xp, cp, m, n](Node& self) {
    if (xp->requires_grad) {
      double* g = xp->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * cp->value[i];
    }
    if (cp->requires_grad) {
      double* g = cp->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * xp->value[i * n + j];
        g[i] += acc;
      }
    }
  });
}

Tensor elu(const Tensor& x, double alpha) {
  return unary(
      x, [alpha](double v) { return v >= 0.0 ? v : alpha * std::expm1(v); },
      [alpha](double v, double y) { return v >= 0.0 ? 1.0 : y + alpha; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto& shape = x.shape();
  const auto ax = normalize_axis(axis, shape.size());
  const auto l = layout(shape, ax);
  const auto& xv = node_of(x).value;
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < l.len; ++t) mx = std::max(mx, xv[base + t * l.inner]);
      double z = 0.0;
      for (std::size_t t = 0; t < l.len; ++t) {
        const double e = std::exp(xv[base + t * l.inner] - mx);
        out[base + t * l.inner] = e;
        z += e;
      }
      for (std::size_t t = 0; t < l.len; ++t) out[base + t * l.inner] /= z;
    }
  }
  Node* xp = raw(x);
  return make_result(shape, std::move(out), {x}, [xp, l](Node& self) {
    double* gx = xp->ensure_grad();
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        double dot = 0.0;
        for (std::size_t t = 0; t < l.len; ++t) {
          const auto i = base + t * l.inner;
          dot += self.grad[i] * self.value[i];
        }
        for (std::size_t t = 0; t < l.len; ++t) {
          const auto i = base + t * l.inner;
          gx[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  const auto& shape = x.shape();
  const auto ax = normalize_axis(axis, shape.size());
  const auto l = layout(shape, ax);
  const auto& xv = node_of(x).value;
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < l.len; ++t) mx = std::max(mx, xv[base + t * l.inner]);
      double z = 0.0;
      for (std::size_t t = 0; t < l.len; ++t) z += std::exp(xv[base + t * l.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t t = 0; t < l.len; ++t) out[base + t * l.inner] = xv[base + t * l.inner] - lse;
    }
  }
  Node* xp = raw(x);
  return make_result(shape, std::move(out), {x}, [xp, l](Node& self) {
    double* gx = xp->ensure_grad();
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        double gsum = 0.0;
        for (std::size_t t = 0; t < l.len; ++t) gsum += self.grad[base + t * l.inner];
        for (std::size_t t = 0; t < l.len; ++t) {
          const auto i = base + t * l.inner;
          gx[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.shape() != Shape{1, n} || bias.shape() != Shape{1, n}) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(n));
  }
  const auto& xv = node_of(x).value;
  const auto& gv = node_of(gain).value;
  const auto& bv = node_of(bias).value;
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xv[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xv[i * n + j] - mean) * inv_std[i];
      xhat[i * n + j] = h;
      out[i * n + j] = h * gv[j] + bv[j];
    }
  }
  Node* xp = raw(x);
  Node* gp = raw(gain);
  Node* bp = raw(bias);
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [xp, gp, bp, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const double* g = self.grad.data();
        if (gp->requires_grad) {
          double* gg = gp->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
        }
        if (bp->requires_grad) {
          double* gb = bp->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
        if (xp->requires_grad) {
          double* gx = xp->ensure_grad();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gp->value[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gp->value[j];
              gx[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, DropoutStream& stream, bool train) {
  if (!train || p <= 0.0) return x;
  if (p >= 1.0) throw InputError("dropout probability must be < 1");
  const std::uint64_t call = stream.next_call();
  const std::uint64_t key = mix64(stream.seed(), call);
  const auto& xv = node_of(x).value;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = unit_interval(mix64(key, i)) >= p ? keep_scale : 0.0;
    out[i] = xv[i] * mask[i];
  }
  Node* xp = raw(x);
  return make_result(x.shape(), std::move(out), {x}, [xp, mask = std::move(mask)](Node& self) {
    double* gx = xp->ensure_grad();
    for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += self.grad[i] * mask[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != n) throw DimensionError("concat_rows: column counts differ");
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<Node*> ptrs;
  for (const auto& p : parts) {
    const auto& v = node_of(p).value;
    out.insert(out.end(), v.begin(), v.end());
    ptrs.push_back(raw(p));
  }
  return make_result({m, n}, std::move(out), {parts.begin(), parts.end()}, [ptrs](Node& self) {
    std::size_t offset = 0;
    for (Node* p : ptrs) {
      const auto len = p->value.size();
      if (p->requires_grad) {
        double* g = p->ensure_grad();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::vector<Node*> ptrs;
  std::size_t c0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = node_of(parts[k]).value;
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * widths[k]), widths[k], out.begin() + static_cast<std::ptrdiff_t>(i * n + c0));
    c0 += widths[k];
    ptrs.push_back(raw(parts[k]));
  }
  return make_result({m, n}, std::move(out), {parts.begin(), parts.end()}, [ptrs, widths, m, n](Node& self) {
    std::size_t c = 0;
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
      if (ptrs[k]->requires_grad) {
        double* g = ptrs[k]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += self.grad[i * n + c + j];
      }
      c += widths[k];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin >= end || end > x.rows()) {
    throw DimensionError("slice_rows: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         shape_string(x.shape()));
  }
  const std::size_t n = x.cols();
  const auto& xv = node_of(x).value;
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * n));
  Node* xp = raw(x);
  return make_result({end - begin, n}, std::move(out), {x}, [xp, begin, n](Node& self) {
    double* g = xp->ensure_grad() + begin * n;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  if (begin >= end || end > x.cols()) {
    throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         shape_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  const auto& xv = node_of(x).value;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * n + begin + j];
  Node* xp = raw(x);
  return make_result({m, w}, std::move(out), {x}, [xp, begin, m, n, w](Node& self) {
    double* g = xp->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "gather_rows");
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  const std::size_t m = x.rows(), n = x.cols();
  const auto& xv = node_of(x).value;
  std::vector<double> out(index.size() * n);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= m) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(index[e] * n), n, out.begin() + static_cast<std::ptrdiff_t>(e * n));
  }
  Node* xp = raw(x);
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({index.size(), n}, std::move(out), {x}, [xp, idx = std::move(idx), n](Node& self) {
    double* g = xp->ensure_grad();
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t j = 0; j < n; ++j) g[idx[e] * n + j] += self.grad[e * n + j];
  });
}

Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n_out) {
  require_matrix(x, "scatter_add_rows");
  if (index.size() != x.rows()) throw DimensionError("scatter_add_rows: index length must equal row count");
  if (n_out == 0) throw DimensionError("scatter_add_rows: empty output");
  const std::size_t n = x.cols();
  const auto& xv = node_of(x).value;
  std::vector<double> out(n_out * n, 0.0);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= n_out) throw DimensionError("scatter_add_rows: target row out of range");
    for (std::size_t j = 0; j < n; ++j) out[index[e] * n + j] += xv[e * n + j];
  }
  Node* xp = raw(x);
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({n_out, n}, std::move(out), {x}, [xp, idx = std::move(idx), n](Node& self) {
    double* g = xp->ensure_grad();
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t j = 0; j < n; ++j) g[e * n + j] += self.grad[idx[e] * n + j];
  });
}

Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segment, std::size_t n_segments) {
  require_matrix(logits, "segment_softmax");
  if (logits.cols() != 1 || logits.rows() != segment.size()) {
    throw DimensionError("segment_softmax: logits must be Ex1 with one segment id per row");
  }
  const auto& xv = node_of(logits).value;
  const std::size_t e_count = segment.size();
  std::vector<double> mx(n_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < e_count; ++e) {
    if (segment[e] >= n_segments) throw DimensionError("segment_softmax: segment id out of range");
    mx[segment[e]] = std::max(mx[segment[e]], xv[e]);
  }
  std::vector<double> z(n_segments, 0.0);
  std::vector<double> out(e_count);
  for (std::size_t e = 0; e < e_count; ++e) {
    out[e] = std::exp(xv[e] - mx[segment[e]]);
    z[segment[e]] += out[e];
  }
  for (std::size_t e = 0; e < e_count; ++e) out[e] /= z[segment[e]];
  Node* xp = raw(logits);
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return make_result({e_count, 1}, std::move(out), {logits}, [xp, seg = std::move(seg), n_segments](Node& self) {
    std::vector<double> dot(n_segments, 0.0);
    for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += self.grad[e] * self.value[e];
    double* g = xp->ensure_grad();
    for (std::size_t e = 0; e < seg.size(); ++e) g[e] += self.value[e] * (self.grad[e] - dot[seg[e]]);
  });
}

Tensor mean_rows(const Tensor& x) {
  require_matrix(x, "mean_rows");
  const std::size_t m = x.rows(), n = x.cols();
  const auto& xv = node_of(x).value;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += xv[i * n + j];
  for (auto& v : out) v /= static_cast<double>(m);
  Node* xp = raw(x);
  return make_result({1, n}, std::move(out), {x}, [xp, m, n](Node& self) {
    double* g = xp->ensure_grad();
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j] * inv;
  });
}

Tensor sum(const Tensor& x) {
  const auto& xv = node_of(x).value;
  double s = 0.0;
  for (double v : xv) s += v;
  Node* xp = raw(x);
  return make_result({1}, {s}, {x}, [xp](Node& self) {
    double* g = xp->ensure_grad();
    for (std::size_t i = 0; i < xp->value.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor sum_squares(const Tensor& x) {
  const auto& xv = node_of(x).value;
  double s = 0.0;
  for (double v : xv) s += v * v;
  Node* xp = raw(x);
  return make_result({1}, {s}, {x}, [xp](Node& self) {
    double* g = xp->ensure_grad();
    for (std::size_t i = 0; i < xp->value.size(); ++i) g[i] += 2.0 * xp->value[i] * self.grad[0];
  });
}

Tensor pick(const Tensor& x, std::size_t r, std::size_t c) {
  const double v = x.at(r, c);
  const std::size_t flat = r * x.cols() + c;
  Node* xp = raw(x);
  return make_result({1}, {v}, {x}, [xp, flat](Node& self) { xp->ensure_grad()[flat] += self.grad[0]; });
}

Tensor nll(const Tensor& log_probs, std::size_t label) {
  require_matrix(log_probs, "nll");
  if (log_probs.rows() != 1) throw DimensionError("nll: expected a 1xC row of log-probabilities");
  if (label >= log_probs.cols()) {
    throw InputError("label " + std::to_string(label) + " outside [0, " + std::to_string(log_probs.cols()) + ")");
  }
  return scale(pick(log_probs, 0, label), -1.0);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Node* xp = raw(x);
  return make_result(std::move(shape), node_of(x).value, {x}, [xp](Node& self) {
    double* g = xp->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace kalm::num
