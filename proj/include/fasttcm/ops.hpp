#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "fasttcm/tensor.hpp"

namespace ftcm {

namespace detail {

inline bool any_requires_grad(std::initializer_list<const Tensor*> parents) {
    for (const Tensor* p : parents)
        if (p->requires_grad()) return true;
    return false;
}

// Marks `out` as requiring grad if any parent does, and records the backward
// closure when a tape is active.
inline void track(Tensor& out, std::initializer_list<const Tensor*> parents,
                  Graph::PullFn fn) {
    if (!any_requires_grad(parents)) return;
    out.impl->requires_grad = true;
    if (Graph* g = Graph::current()) g->record(out.impl, std::move(fn));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    Tensor out = Tensor::uninitialized(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl](Graph& g, const std::vector<double>& up) {
                      g.accumulate(ia, up);
                      g.accumulate(ib, up);
                  });
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) - b.at(i);
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl](Graph& g, const std::vector<double>& up) {
                      g.accumulate(ia, up);
                      std::vector<double> nu(up.size());
                      for (size_t i = 0; i < up.size(); ++i) nu[i] = -up[i];
                      g.accumulate(ib, nu);
                  });
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) * b.at(i);
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(up.size()), gb(up.size());
                      for (size_t i = 0; i < up.size(); ++i) {
                          ga[i] = up[i] * ib->data[i];
                          gb[i] = up[i] * ia->data[i];
                      }
                      g.accumulate(ia, ga);
                      g.accumulate(ib, gb);
                  });
    return out;
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "div");
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) / b.at(i);
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(up.size()), gb(up.size());
                      for (size_t i = 0; i < up.size(); ++i) {
                          const double bv = ib->data[i];
                          ga[i] = up[i] / bv;
                          gb[i] = -up[i] * ia->data[i] / (bv * bv);
                      }
                      g.accumulate(ia, ga);
                      g.accumulate(ib, gb);
                  });
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) * c;
    detail::track(out, {&a}, [ia = a.impl, c](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(up.size());
        for (size_t i = 0; i < up.size(); ++i) ga[i] = up[i] * c;
        g.accumulate(ia, ga);
    });
    return out;
}

inline Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) + c;
    detail::track(out, {&a}, [ia = a.impl](Graph& g, const std::vector<double>& up) {
        g.accumulate(ia, up);
    });
    return out;
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor exp(const Tensor& a) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = std::exp(a.at(i));
    detail::track(out, {&a},
                  [ia = a.impl, io = out.impl](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(up.size());
                      for (size_t i = 0; i < up.size(); ++i) ga[i] = up[i] * io->data[i];
                      g.accumulate(ia, ga);
                  });
    return out;
}

inline Tensor log(const Tensor& a) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = std::log(a.at(i));
    detail::track(out, {&a}, [ia = a.impl](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(up.size());
        for (size_t i = 0; i < up.size(); ++i) ga[i] = up[i] / ia->data[i];
        g.accumulate(ia, ga);
    });
    return out;
}

inline Tensor sqrt(const Tensor& a) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = std::sqrt(a.at(i));
    detail::track(out, {&a},
                  [ia = a.impl, io = out.impl](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(up.size());
                      for (size_t i = 0; i < up.size(); ++i)
                          ga[i] = up[i] * 0.5 / io->data[i];
                      g.accumulate(ia, ga);
                  });
    return out;
}

inline Tensor relu(const Tensor& a) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) > 0.0 ? a.at(i) : 0.0;
    detail::track(out, {&a}, [ia = a.impl](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(up.size());
        for (size_t i = 0; i < up.size(); ++i)
            ga[i] = ia->data[i] > 0.0 ? up[i] : 0.0;
        g.accumulate(ia, ga);
    });
    return out;
}

// Numerically stable; saturates to exactly 0/1 without overflow.
inline Tensor sigmoid(const Tensor& a) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = a.at(i);
        if (x >= 0.0) {
            out.at(i) = 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            out.at(i) = e / (1.0 + e);
        }
    }
    detail::track(out, {&a},
                  [ia = a.impl, io = out.impl](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(up.size());
                      for (size_t i = 0; i < up.size(); ++i) {
                          const double y = io->data[i];
                          ga[i] = up[i] * y * (1.0 - y);
                      }
                      g.accumulate(ia, ga);
                  });
    return out;
}

// Gradient passes through strictly inside (lo, hi) and is zero outside.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = std::clamp(a.at(i), lo, hi);
    detail::track(out, {&a},
                  [ia = a.impl, lo, hi](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(up.size());
                      for (size_t i = 0; i < up.size(); ++i) {
                          const double x = ia->data[i];
                          ga[i] = (x > lo && x < hi) ? up[i] : 0.0;
                      }
                      g.accumulate(ia, ga);
                  });
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
    Tensor out(Shape{m, p});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (size_t i = 0; i < m; ++i) {
        double* orow = po + i * p;
        for (size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double* brow = pb + kk * p;
            for (size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl, m, k, p](Graph& g,
                                                      const std::vector<double>& up) {
                      std::vector<double> ga(m * k, 0.0), gb(k * p, 0.0);
                      const double* pa = ia->data.data();
                      const double* pb = ib->data.data();
                      // dA = up . B^T
                      for (size_t i = 0; i < m; ++i) {
                          const double* urow = up.data() + i * p;
                          for (size_t kk = 0; kk < k; ++kk) {
                              const double* brow = pb + kk * p;
                              double s = 0.0;
                              for (size_t j = 0; j < p; ++j) s += urow[j] * brow[j];
                              ga[i * k + kk] = s;
                          }
                      }
                      // dB = A^T . up
                      for (size_t i = 0; i < m; ++i) {
                          const double* urow = up.data() + i * p;
                          for (size_t kk = 0; kk < k; ++kk) {
                              const double av = pa[i * k + kk];
                              double* gbrow = gb.data() + kk * p;
                              for (size_t j = 0; j < p; ++j) gbrow[j] += av * urow[j];
                          }
                      }
                      g.accumulate(ia, ga);
                      g.accumulate(ib, gb);
                  });
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2)
        throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
    const size_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::uninitialized(Shape{n, m});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    detail::track(out, {&a}, [ia = a.impl, m, n](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(m * n);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) ga[i * n + j] = up[j * m + i];
        g.accumulate(ia, ga);
    });
    return out;
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size())
        throw ShapeError("reshape: cannot reshape " + shape_str(a.shape()) + " to " +
                         shape_str(shape));
    Tensor out = Tensor::uninitialized(std::move(shape));
    std::memcpy(out.data(), a.data(), a.size() * sizeof(double));
    detail::track(out, {&a}, [ia = a.impl](Graph& g, const std::vector<double>& up) {
        g.accumulate(ia, up);
    });
    return out;
}

// ---------------------------------------------------------------------------
// reductions and broadcasts

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.at(i);
    Tensor out = Tensor::scalar(s);
    detail::track(out, {&a}, [ia = a.impl](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(ia->data.size(), up[0]);
        g.accumulate(ia, ga);
    });
    return out;
}

inline Tensor mean(const Tensor& a) {
    const size_t n = a.size();
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a.at(i);
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    detail::track(out, {&a}, [ia = a.impl, n](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(ia->data.size(), up[0] / static_cast<double>(n));
        g.accumulate(ia, ga);
    });
    return out;
}

// [m, n] -> [n], column means.
inline Tensor mean_rows(const Tensor& a) {
    if (a.rank() != 2)
        throw ShapeError("mean_rows: expected rank 2, got " + shape_str(a.shape()));
    const size_t m = a.dim(0), n = a.dim(1);
    Tensor out(Shape{n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.at(j) += a.at(i, j);
    for (size_t j = 0; j < n; ++j) out.at(j) /= static_cast<double>(m);
    detail::track(out, {&a}, [ia = a.impl, m, n](Graph& g, const std::vector<double>& up) {
        std::vector<double> ga(m * n);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) ga[i * n + j] = up[j] / static_cast<double>(m);
        g.accumulate(ia, ga);
    });
    return out;
}

// mat[m, n] + vec[n], broadcast over rows.
inline Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
    if (mat.rank() != 2 || vec.rank() != 1 || mat.dim(1) != vec.dim(0))
        throw ShapeError("add_rowvec: incompatible shapes " + shape_str(mat.shape()) +
                         " vs " + shape_str(vec.shape()));
    const size_t m = mat.dim(0), n = mat.dim(1);
    Tensor out = Tensor::uninitialized(Shape{m, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.at(i, j) = mat.at(i, j) + vec.at(j);
    detail::track(out, {&mat, &vec},
                  [im = mat.impl, iv = vec.impl, m, n](Graph& g,
                                                       const std::vector<double>& up) {
                      g.accumulate(im, up);
                      std::vector<double> gv(n, 0.0);
                      for (size_t i = 0; i < m; ++i)
                          for (size_t j = 0; j < n; ++j) gv[j] += up[i * n + j];
                      g.accumulate(iv, gv);
                  });
    return out;
}

// scalar tensor * tensor
inline Tensor smul(const Tensor& s, const Tensor& a) {
    if (s.size() != 1)
        throw ShapeError("smul: scalar operand has shape " + shape_str(s.shape()));
    const double sv = s.at(0);
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t i = 0; i < out.size(); ++i) out.at(i) = sv * a.at(i);
    detail::track(out, {&s, &a},
                  [is = s.impl, ia = a.impl](Graph& g, const std::vector<double>& up) {
                      double gs = 0.0;
                      std::vector<double> ga(up.size());
                      const double sv = is->data[0];
                      for (size_t i = 0; i < up.size(); ++i) {
                          gs += up[i] * ia->data[i];
                          ga[i] = up[i] * sv;
                      }
                      g.accumulate(is, &gs, 1);
                      g.accumulate(ia, ga);
                  });
    return out;
}

// ---------------------------------------------------------------------------
// slicing and concatenation (rank 2)

inline Tensor slice_rows(const Tensor& a, size_t r0, size_t r1) {
    if (a.rank() != 2 || r0 > r1 || r1 > a.dim(0))
        throw ShapeError("slice_rows: invalid range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") for shape " + shape_str(a.shape()));
    const size_t n = a.dim(1);
    Tensor out = Tensor::uninitialized(Shape{r1 - r0, n});
    std::memcpy(out.data(), a.data() + r0 * n, (r1 - r0) * n * sizeof(double));
    detail::track(out, {&a},
                  [ia = a.impl, r0, n](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(ia->data.size(), 0.0);
                      std::copy(up.begin(), up.end(), ga.begin() + r0 * n);
                      g.accumulate(ia, ga);
                  });
    return out;
}

inline Tensor slice_cols(const Tensor& a, size_t c0, size_t c1) {
    if (a.rank() != 2 || c0 > c1 || c1 > a.dim(1))
        throw ShapeError("slice_cols: invalid range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") for shape " + shape_str(a.shape()));
    const size_t m = a.dim(0), n = a.dim(1), w = c1 - c0;
    Tensor out = Tensor::uninitialized(Shape{m, w});
    for (size_t i = 0; i < m; ++i)
        std::memcpy(out.data() + i * w, a.data() + i * n + c0, w * sizeof(double));
    detail::track(out, {&a},
                  [ia = a.impl, m, n, c0, w](Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(m * n, 0.0);
                      for (size_t i = 0; i < m; ++i)
                          for (size_t j = 0; j < w; ++j)
                              ga[i * n + c0 + j] = up[i * w + j];
                      g.accumulate(ia, ga);
                  });
    return out;
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("concat_rows: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const size_t ma = a.dim(0), mb = b.dim(0), n = a.dim(1);
    Tensor out = Tensor::uninitialized(Shape{ma + mb, n});
    std::memcpy(out.data(), a.data(), ma * n * sizeof(double));
    std::memcpy(out.data() + ma * n, b.data(), mb * n * sizeof(double));
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl, ma, mb, n](Graph& g,
                                                        const std::vector<double>& up) {
                      g.accumulate(ia, up.data(), ma * n);
                      g.accumulate(ib, up.data() + ma * n, mb * n);
                  });
    return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw ShapeError("concat_cols: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const size_t m = a.dim(0), na = a.dim(1), nb = b.dim(1);
    Tensor out = Tensor::uninitialized(Shape{m, na + nb});
    for (size_t i = 0; i < m; ++i) {
        std::memcpy(out.data() + i * (na + nb), a.data() + i * na, na * sizeof(double));
        std::memcpy(out.data() + i * (na + nb) + na, b.data() + i * nb,
                    nb * sizeof(double));
    }
    detail::track(out, {&a, &b},
                  [ia = a.impl, ib = b.impl, m, na, nb](Graph& g,
                                                        const std::vector<double>& up) {
                      std::vector<double> ga(m * na), gb(m * nb);
                      for (size_t i = 0; i < m; ++i) {
                          std::memcpy(ga.data() + i * na, up.data() + i * (na + nb),
                                      na * sizeof(double));
                          std::memcpy(gb.data() + i * nb, up.data() + i * (na + nb) + na,
                                      nb * sizeof(double));
                      }
                      g.accumulate(ia, ga);
                      g.accumulate(ib, gb);
                  });
    return out;
}

// ---------------------------------------------------------------------------
// normalization and softmax

// Max-subtracted softmax along `axis`.
inline Tensor softmax(const Tensor& a, size_t axis) {
    if (axis >= a.rank())
        throw ShapeError("softmax: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(a.shape()));
    const size_t len = a.dim(axis);
    size_t inner = 1;
    for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    const size_t outer = a.size() / (len * inner);
    Tensor out = Tensor::uninitialized(a.shape());
    for (size_t o = 0; o < outer; ++o) {
        for (size_t in = 0; in < inner; ++in) {
            const size_t base = o * len * inner + in;
            double m = -std::numeric_limits<double>::infinity();
            for (size_t l = 0; l < len; ++l) m = std::max(m, a.at(base + l * inner));
            double s = 0.0;
            for (size_t l = 0; l < len; ++l) {
                const double e = std::exp(a.at(base + l * inner) - m);
                out.at(base + l * inner) = e;
                s += e;
            }
            for (size_t l = 0; l < len; ++l) out.at(base + l * inner) /= s;
        }
    }
    detail::track(out, {&a},
                  [ia = a.impl, io = out.impl, len, inner, outer](
                      Graph& g, const std::vector<double>& up) {
                      std::vector<double> ga(ia->data.size());
                      for (size_t o = 0; o < outer; ++o) {
                          for (size_t in = 0; in < inner; ++in) {
                              const size_t base = o * len * inner + in;
                              double dot = 0.0;
                              for (size_t l = 0; l < len; ++l) {
                                  const size_t k = base + l * inner;
                                  dot += up[k] * io->data[k];
                              }
                              for (size_t l = 0; l < len; ++l) {
                                  const size_t k = base + l * inner;
                                  ga[k] = io->data[k] * (up[k] - dot);
                              }
                          }
                      }
                      g.accumulate(ia, ga);
                  });
    return out;
}

// Normalization over the last axis, then affine with gamma/beta.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
    if (x.rank() < 1)
        throw ShapeError("layer_norm: input must have rank >= 1");
    const size_t d = x.dim(x.rank() - 1);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
        throw ShapeError("layer_norm: affine params must have shape [" +
                         std::to_string(d) + "], got " + shape_str(gamma.shape()) +
                         " and " + shape_str(beta.shape()));
    const size_t slices = x.size() / d;
    Tensor out = Tensor::uninitialized(x.shape());
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv = std::make_shared<std::vector<double>>(slices);
    for (size_t s = 0; s < slices; ++s) {
        const double* xs = x.data() + s * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += xs[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            const double c = xs[j] - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double iv = 1.0 / std::sqrt(var + eps);
        (*inv)[s] = iv;
        for (size_t j = 0; j < d; ++j) {
            const double xh = (xs[j] - mu) * iv;
            (*xhat)[s * d + j] = xh;
            out.at(s * d + j) = gamma.at(j) * xh + beta.at(j);
        }
    }
    detail::track(
        out, {&x, &gamma, &beta},
        [ix = x.impl, ig = gamma.impl, ib = beta.impl, xhat, inv, slices,
         d](Graph& g, const std::vector<double>& up) {
            std::vector<double> gx(ix->data.size()), gg(d, 0.0), gb(d, 0.0);
            for (size_t s = 0; s < slices; ++s) {
                const double* u = up.data() + s * d;
                const double* xh = xhat->data() + s * d;
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    gg[j] += u[j] * xh[j];
                    gb[j] += u[j];
                    const double dxh = u[j] * ig->data[j];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * xh[j];
                }
                mean_dxh /= static_cast<double>(d);
                mean_dxh_xh /= static_cast<double>(d);
                const double iv = (*inv)[s];
                for (size_t j = 0; j < d; ++j) {
                    const double dxh = u[j] * ig->data[j];
                    gx[s * d + j] = iv * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                }
            }
            g.accumulate(ix, gx);
            g.accumulate(ig, gg);
            g.accumulate(ib, gb);
        });
    return out;
}

// ---------------------------------------------------------------------------
// convolution and resampling (HWC layout)

// x: [H, W, Cin], w: [KH, KW, Cin, Cout], b: [Cout]
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, size_t stride,
                     size_t pad) {
    if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1 || x.dim(2) != w.dim(2) ||
        w.dim(3) != b.dim(0))
        throw ShapeError("conv2d: incompatible shapes " + shape_str(x.shape()) + ", " +
                         shape_str(w.shape()) + ", " + shape_str(b.shape()));
    const size_t H = x.dim(0), W = x.dim(1), Cin = x.dim(2);
    const size_t KH = w.dim(0), KW = w.dim(1), Cout = w.dim(3);
    const size_t OH = (H + 2 * pad - KH) / stride + 1;
    const size_t OW = (W + 2 * pad - KW) / stride + 1;
    Tensor out = Tensor::uninitialized(Shape{OH, OW, Cout});
    const double* px = x.data();
    const double* pw = w.data();
    double* po = out.data();
    for (size_t oy = 0; oy < OH; ++oy) {
        for (size_t ox = 0; ox < OW; ++ox) {
            double* orow = po + (oy * OW + ox) * Cout;
            for (size_t co = 0; co < Cout; ++co) orow[co] = b.at(co);
            for (size_t ky = 0; ky < KH; ++ky) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                for (size_t kx = 0; kx < KW; ++kx) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                    const double* xrow = px + (iy * W + ix) * Cin;
                    const double* wbase = pw + (ky * KW + kx) * Cin * Cout;
                    for (size_t ci = 0; ci < Cin; ++ci) {
                        const double xv = xrow[ci];
                        const double* wrow = wbase + ci * Cout;
                        for (size_t co = 0; co < Cout; ++co) orow[co] += xv * wrow[co];
                    }
                }
            }
        }
    }
    detail::track(
        out, {&x, &w, &b},
        [ix = x.impl, iw = w.impl, ib = b.impl, H, W, Cin, KH, KW, Cout, OH, OW, stride,
         pad](Graph& g, const std::vector<double>& up) {
            std::vector<double> gx(ix->data.size(), 0.0), gw(iw->data.size(), 0.0),
                gb(Cout, 0.0);
            const double* px = ix->data.data();
            const double* pw = iw->data.data();
            for (size_t oy = 0; oy < OH; ++oy) {
                for (size_t ox = 0; ox < OW; ++ox) {
                    const double* urow = up.data() + (oy * OW + ox) * Cout;
                    for (size_t co = 0; co < Cout; ++co) gb[co] += urow[co];
                    for (size_t ky = 0; ky < KH; ++ky) {
                        const long iy =
                            static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                        if (iy < 0 || iy >= static_cast<long>(H)) continue;
                        for (size_t kx = 0; kx < KW; ++kx) {
                            const long ixp = static_cast<long>(ox * stride + kx) -
                                             static_cast<long>(pad);
                            if (ixp < 0 || ixp >= static_cast<long>(W)) continue;
                            const size_t xoff = (iy * W + ixp) * Cin;
                            const size_t woff = (ky * KW + kx) * Cin * Cout;
                            for (size_t ci = 0; ci < Cin; ++ci) {
                                const double xv = px[xoff + ci];
                                const double* wrow = pw + woff + ci * Cout;
                                double* gwrow = gw.data() + woff + ci * Cout;
                                double dxv = 0.0;
                                for (size_t co = 0; co < Cout; ++co) {
                                    gwrow[co] += xv * urow[co];
                                    dxv += wrow[co] * urow[co];
                                }
                                gx[xoff + ci] += dxv;
                            }
                        }
                    }
                }
            }
            g.accumulate(ix, gx);
            g.accumulate(iw, gw);
            g.accumulate(ib, gb);
        });
    return out;
}

// Pointwise (1x1) convolution: x[h, w, ci] . w[ci, co] + b[co] -> [h, w, co].
// Same math as reshape+matmul+bias, without the copies.
inline Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 3 || w.rank() != 2 || b.rank() != 1 || x.dim(2) != w.dim(0) ||
        w.dim(1) != b.dim(0))
        throw ShapeError("conv1x1: incompatible shapes " + shape_str(x.shape()) + ", " +
                         shape_str(w.shape()) + ", " + shape_str(b.shape()));
    const size_t hw = x.dim(0) * x.dim(1), ci = x.dim(2), co = w.dim(1);
    Tensor out = Tensor::uninitialized(Shape{x.dim(0), x.dim(1), co});
    const double* px = x.data();
    const double* pw = w.data();
    double* po = out.data();
    for (size_t i = 0; i < hw; ++i) {
        double* orow = po + i * co;
        for (size_t j = 0; j < co; ++j) orow[j] = b.at(j);
        const double* xrow = px + i * ci;
        for (size_t k = 0; k < ci; ++k) {
            const double xv = xrow[k];
            const double* wrow = pw + k * co;
            for (size_t j = 0; j < co; ++j) orow[j] += xv * wrow[j];
        }
    }
    detail::track(out, {&x, &w, &b},
                  [ix = x.impl, iw = w.impl, ib = b.impl, hw, ci,
                   co](Graph& g, const std::vector<double>& up) {
                      std::vector<double> gx(hw * ci), gw(ci * co, 0.0), gb(co, 0.0);
                      const double* px = ix->data.data();
                      const double* pw = iw->data.data();
                      for (size_t i = 0; i < hw; ++i) {
                          const double* urow = up.data() + i * co;
                          const double* xrow = px + i * ci;
                          for (size_t j = 0; j < co; ++j) gb[j] += urow[j];
                          for (size_t k = 0; k < ci; ++k) {
                              const double* wrow = pw + k * co;
                              double* gwrow = gw.data() + k * co;
                              double s = 0.0;
                              const double xv = xrow[k];
                              for (size_t j = 0; j < co; ++j) {
                                  s += urow[j] * wrow[j];
                                  gwrow[j] += xv * urow[j];
                              }
                              gx[i * ci + k] = s;
                          }
                      }
                      g.accumulate(ix, gx);
                      g.accumulate(iw, gw);
                      g.accumulate(ib, gb);
                  });
    return out;
}

// [h, w, c] -> [h*f, w*f, c]
inline Tensor upsample_nearest(const Tensor& x, size_t factor) {
    if (x.rank() != 3)
        throw ShapeError("upsample_nearest: expected rank 3, got " +
                         shape_str(x.shape()));
    const size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out = Tensor::uninitialized(Shape{h * factor, w * factor, c});
    for (size_t y = 0; y < h * factor; ++y) {
        const size_t sy = y / factor;
        for (size_t xx = 0; xx < w * factor; ++xx) {
            const size_t sx = xx / factor;
            std::memcpy(out.data() + (y * w * factor + xx) * c,
                        x.data() + (sy * w + sx) * c, c * sizeof(double));
        }
    }
    detail::track(out, {&x},
                  [ix = x.impl, h, w, c, factor](Graph& g, const std::vector<double>& up) {
                      std::vector<double> gx(h * w * c, 0.0);
                      for (size_t y = 0; y < h * factor; ++y) {
                          const size_t sy = y / factor;
                          for (size_t xx = 0; xx < w * factor; ++xx) {
                              const size_t sx = xx / factor;
                              const double* u = up.data() + (y * w * factor + xx) * c;
                              double* gr = gx.data() + (sy * w + sx) * c;
                              for (size_t k = 0; k < c; ++k) gr[k] += u[k];
                          }
                      }
                      g.accumulate(ix, gx);
                  });
    return out;
}

} // namespace ftcm
