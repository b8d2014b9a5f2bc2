#include "hner/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hner {

namespace {

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor::Tensor(std::vector<int> shp, double fill)
    : shape(std::move(shp)), data(shape_size(shape), fill) {}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

TensorPtr make_tensor(std::vector<int> shape, double fill) {
    return std::make_shared<Tensor>(std::move(shape), fill);
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data) {
    auto t = std::make_shared<Tensor>(std::move(shape));
    if (t->data.size() != data.size())
        throw std::invalid_argument("make_tensor: data length does not match shape");
    t->data = std::move(data);
    return t;
}

void backward(const TensorPtr& loss, Tape& tape) {
    if (loss->size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    // Intermediate grads are transient per backward call; parameter grads
    // accumulate until zero_grad.
    for (const auto& n : tape.nodes()) {
        n.out->ensure_grad();
        if (!n.out->requires_grad) n.out->zero_grad();
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    const auto& nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it)
        if (it->backward) it->backward();
}

double logsumexp(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("logsumexp: empty input");
    double mx = -std::numeric_limits<double>::infinity();
    for (double s : scores) mx = std::max(mx, s);
    if (mx == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("logsumexp: all entries are -inf");
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    return mx + std::log(sum);
}

std::vector<double> softmax(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("softmax: empty input");
    double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> layer_norm(const std::vector<double>& x,
                               const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps) {
    if (x.size() != gamma.size() || x.size() != beta.size())
        throw std::invalid_argument("layer_norm: length mismatch");
    if (eps <= 0) throw std::invalid_argument("layer_norm: eps must be positive");
    const double n = static_cast<double>(x.size());
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;  // population variance
    double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
}

namespace {

// Elementwise binary op helper.
template <class Fwd, class Bwd>
TensorPtr ew_binary(Tape* t, const TensorPtr& a, const TensorPtr& b, const char* name,
                    Fwd fwd, Bwd bwd) {
    check_same_shape(*a, *b, name);
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = fwd(a->data[i], b->data[i]);
    if (t) {
        t->record(out, [a, b, out, bwd]() {
            a->ensure_grad();
            b->ensure_grad();
            for (std::size_t i = 0; i < a->size(); ++i)
                bwd(a->data[i], b->data[i], out->grad[i], a->grad[i], b->grad[i]);
        });
    }
    return out;
}

}  // namespace

TensorPtr add(Tape* t, const TensorPtr& a, const TensorPtr& b) {
    return ew_binary(t, a, b, "add",
                     [](double x, double y) { return x + y; },
                     [](double, double, double g, double& ga, double& gb) {
                         ga += g;
                         gb += g;
                     });
}

TensorPtr sub(Tape* t, const TensorPtr& a, const TensorPtr& b) {
    return ew_binary(t, a, b, "sub",
                     [](double x, double y) { return x - y; },
                     [](double, double, double g, double& ga, double& gb) {
                         ga += g;
                         gb -= g;
                     });
}

TensorPtr mul(Tape* t, const TensorPtr& a, const TensorPtr& b) {
    return ew_binary(t, a, b, "mul",
                     [](double x, double y) { return x * y; },
                     [](double x, double y, double g, double& ga, double& gb) {
                         ga += g * y;
                         gb += g * x;
                     });
}

TensorPtr scale(Tape* t, const TensorPtr& a, double s) {
    auto out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * s;
    if (t) {
        t->record(out, [a, out, s]() {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * s;
        });
    }
    return out;
}

TensorPtr matmul(Tape* t, const TensorPtr& a, const TensorPtr& b) {
    if (a->cols() != b->rows()) throw std::invalid_argument("matmul: inner dim mismatch");
    const int m = a->rows(), k = a->cols(), n = b->cols();
    auto out = make_tensor({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a->at(i, p);
            for (int j = 0; j < n; ++j) out->at(i, j) += av * b->at(p, j);
        }
    if (t) {
        t->record(out, [a, b, out, m, k, n]() {
            a->ensure_grad();
            b->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = out->gat(i, j);
                    for (int p = 0; p < k; ++p) {
                        a->gat(i, p) += g * b->at(p, j);
                        b->gat(p, j) += g * a->at(i, p);
                    }
                }
        });
    }
    return out;
}

TensorPtr matmul_nt(Tape* t, const TensorPtr& a, const TensorPtr& b) {
    if (a->cols() != b->cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
    const int m = a->rows(), k = a->cols(), n = b->rows();
    auto out = make_tensor({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a->at(i, p) * b->at(j, p);
            out->at(i, j) = s;
        }
    if (t) {
        t->record(out, [a, b, out, m, k, n]() {
            a->ensure_grad();
            b->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = out->gat(i, j);
                    for (int p = 0; p < k; ++p) {
                        a->gat(i, p) += g * b->at(j, p);
                        b->gat(j, p) += g * a->at(i, p);
                    }
                }
        });
    }
    return out;
}

TensorPtr linear(Tape* t, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    auto y = matmul(t, x, w);
    return bcast_add_row(t, y, b);
}

TensorPtr row_softmax(Tape* t, const TensorPtr& x, int valid_cols) {
    const int m = x->rows(), n = x->cols();
    const int vc = valid_cols <= 0 ? n : valid_cols;
    if (vc > n) throw std::invalid_argument("row_softmax: valid_cols exceeds width");
    auto out = make_tensor({m, n});
    for (int i = 0; i < m; ++i) {
        std::vector<double> row(x->data.begin() + static_cast<std::size_t>(i) * n,
                                x->data.begin() + static_cast<std::size_t>(i) * n + vc);
        auto sm = softmax(row);
        for (int j = 0; j < vc; ++j) out->at(i, j) = sm[j];
    }
    if (t) {
        t->record(out, [x, out, m, n, vc]() {
            x->ensure_grad();
            for (int i = 0; i < m; ++i) {
                double dot = 0.0;
                for (int j = 0; j < vc; ++j) dot += out->gat(i, j) * out->at(i, j);
                for (int j = 0; j < vc; ++j)
                    x->gat(i, j) += out->at(i, j) * (out->gat(i, j) - dot);
            }
        });
    }
    return out;
}

TensorPtr row_layer_norm(Tape* t, const TensorPtr& x, const TensorPtr& gamma,
                         const TensorPtr& beta, double eps) {
    const int m = x->rows(), n = x->cols();
    if (gamma->size() != static_cast<std::size_t>(n) || beta->size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("row_layer_norm: parameter length mismatch");
    auto out = make_tensor({m, n});
    // kept for the backward pass
    auto means = std::make_shared<std::vector<double>>(m);
    auto invs = std::make_shared<std::vector<double>>(m);
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x->at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (x->at(i, j) - mean) * (x->at(i, j) - mean);
        var /= n;
        double inv = 1.0 / std::sqrt(var + eps);
        (*means)[i] = mean;
        (*invs)[i] = inv;
        for (int j = 0; j < n; ++j)
            out->at(i, j) = (x->at(i, j) - mean) * inv * gamma->data[j] + beta->data[j];
    }
    if (t) {
        t->record(out, [x, gamma, beta, out, means, invs, m, n]() {
            x->ensure_grad();
            gamma->ensure_grad();
            beta->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double mean = (*means)[i], inv = (*invs)[i];
                double sum_g = 0.0, sum_gx = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double xhat = (x->at(i, j) - mean) * inv;
                    const double gy = out->gat(i, j) * gamma->data[j];
                    gamma->grad[j] += out->gat(i, j) * xhat;
                    beta->grad[j] += out->gat(i, j);
                    sum_g += gy;
                    sum_gx += gy * xhat;
                }
                for (int j = 0; j < n; ++j) {
                    const double xhat = (x->at(i, j) - mean) * inv;
                    const double gy = out->gat(i, j) * gamma->data[j];
                    x->gat(i, j) += inv * (gy - sum_g / n - xhat * sum_gx / n);
                }
            }
        });
    }
    return out;
}

namespace {

template <class Fwd, class Grad>
TensorPtr ew_unary(Tape* t, const TensorPtr& x, Fwd fwd, Grad grad_fn) {
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) out->data[i] = fwd(x->data[i]);
    if (t) {
        t->record(out, [x, out, grad_fn]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->size(); ++i)
                x->grad[i] += out->grad[i] * grad_fn(x->data[i], out->data[i]);
        });
    }
    return out;
}

}  // namespace

TensorPtr gelu_op(Tape* t, const TensorPtr& x) {
    return ew_unary(t, x, [](double v) { return gelu(v); },
                    [](double v, double) { return gelu_grad(v); });
}

TensorPtr sigmoid_op(Tape* t, const TensorPtr& x) {
    return ew_unary(t, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                    [](double, double y) { return y * (1.0 - y); });
}

TensorPtr tanh_op(Tape* t, const TensorPtr& x) {
    return ew_unary(t, x, [](double v) { return std::tanh(v); },
                    [](double, double y) { return 1.0 - y * y; });
}

TensorPtr gather_rows(Tape* t, const TensorPtr& x, const std::vector<int>& idx) {
    const int n = x->cols();
    for (int i : idx)
        if (i < 0 || i >= x->rows()) throw std::out_of_range("gather_rows: index out of bounds");
    auto out = make_tensor({static_cast<int>(idx.size()), n});
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < n; ++j) out->at(static_cast<int>(r), j) = x->at(idx[r], j);
    if (t) {
        auto ids = idx;
        t->record(out, [x, out, ids, n]() {
            x->ensure_grad();
            for (std::size_t r = 0; r < ids.size(); ++r)
                for (int j = 0; j < n; ++j)
                    x->gat(ids[r], j) += out->gat(static_cast<int>(r), j);
        });
    }
    return out;
}

TensorPtr slice_cols(Tape* t, const TensorPtr& x, int start, int len) {
    if (start < 0 || len <= 0 || start + len > x->cols())
        throw std::out_of_range("slice_cols: range out of bounds");
    const int m = x->rows();
    auto out = make_tensor({m, len});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j) out->at(i, j) = x->at(i, start + j);
    if (t) {
        t->record(out, [x, out, start, len, m]() {
            x->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < len; ++j) x->gat(i, start + j) += out->gat(i, j);
        });
    }
    return out;
}

TensorPtr concat_cols(Tape* t, const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int m = parts[0]->rows();
    int n = 0;
    for (const auto& p : parts) {
        if (p->rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
        n += p->cols();
    }
    auto out = make_tensor({m, n});
    int off = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p->cols(); ++j) out->at(i, off + j) = p->at(i, j);
        off += p->cols();
    }
    if (t) {
        auto ps = parts;
        t->record(out, [ps, out, m]() {
            int off = 0;
            for (const auto& p : ps) {
                p->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < p->cols(); ++j) p->gat(i, j) += out->gat(i, off + j);
                off += p->cols();
            }
        });
    }
    return out;
}

TensorPtr stack_rows(Tape* t, const std::vector<TensorPtr>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
    const int n = rows[0]->cols();
    auto out = make_tensor({static_cast<int>(rows.size()), n});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r]->rows() != 1 || rows[r]->cols() != n)
            throw std::invalid_argument("stack_rows: each input must be [1 x n]");
        for (int j = 0; j < n; ++j) out->at(static_cast<int>(r), j) = rows[r]->at(0, j);
    }
    if (t) {
        auto rs = rows;
        t->record(out, [rs, out, n]() {
            for (std::size_t r = 0; r < rs.size(); ++r) {
                rs[r]->ensure_grad();
                for (int j = 0; j < n; ++j)
                    rs[r]->gat(0, j) += out->gat(static_cast<int>(r), j);
            }
        });
    }
    return out;
}

TensorPtr bcast_add_col(Tape* t, const TensorPtr& mat, const TensorPtr& vec) {
    const int m = mat->rows(), n = mat->cols();
    if (vec->size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("bcast_add_col: length mismatch");
    auto out = make_tensor({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = mat->at(i, j) + vec->data[i];
    if (t) {
        t->record(out, [mat, vec, out, m, n]() {
            mat->ensure_grad();
            vec->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    mat->gat(i, j) += out->gat(i, j);
                    vec->grad[i] += out->gat(i, j);
                }
        });
    }
    return out;
}

TensorPtr bcast_add_row(Tape* t, const TensorPtr& mat, const TensorPtr& vec) {
    const int m = mat->rows(), n = mat->cols();
    if (vec->size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("bcast_add_row: length mismatch");
    auto out = make_tensor({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = mat->at(i, j) + vec->data[j];
    if (t) {
        t->record(out, [mat, vec, out, m, n]() {
            mat->ensure_grad();
            vec->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    mat->gat(i, j) += out->gat(i, j);
                    vec->grad[j] += out->gat(i, j);
                }
        });
    }
    return out;
}

TensorPtr logsumexp_cols(Tape* t, const TensorPtr& mat) {
    const int m = mat->rows(), n = mat->cols();
    auto out = make_tensor({1, n});
    for (int j = 0; j < n; ++j) {
        std::vector<double> col(m);
        for (int i = 0; i < m; ++i) col[i] = mat->at(i, j);
        out->data[j] = logsumexp(col);
    }
    if (t) {
        t->record(out, [mat, out, m, n]() {
            mat->ensure_grad();
            for (int j = 0; j < n; ++j) {
                const double g = out->grad[j];
                for (int i = 0; i < m; ++i)
                    mat->gat(i, j) += g * std::exp(mat->at(i, j) - out->data[j]);
            }
        });
    }
    return out;
}

TensorPtr logsumexp_all(Tape* t, const TensorPtr& v) {
    auto out = make_tensor({1, 1});
    out->data[0] = logsumexp(v->data);
    if (t) {
        t->record(out, [v, out]() {
            v->ensure_grad();
            for (std::size_t i = 0; i < v->size(); ++i)
                v->grad[i] += out->grad[0] * std::exp(v->data[i] - out->data[0]);
        });
    }
    return out;
}

TensorPtr sum_all(Tape* t, const TensorPtr& x) {
    auto out = make_tensor({1, 1});
    for (double v : x->data) out->data[0] += v;
    if (t) {
        t->record(out, [x, out]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0];
        });
    }
    return out;
}

TensorPtr pick(Tape* t, const TensorPtr& x, int i, int j) {
    if (i < 0 || i >= x->rows() || j < 0 || j >= x->cols())
        throw std::out_of_range("pick: index out of bounds");
    auto out = make_tensor({1, 1});
    out->data[0] = x->at(i, j);
    if (t) {
        t->record(out, [x, out, i, j]() {
            x->ensure_grad();
            x->gat(i, j) += out->grad[0];
        });
    }
    return out;
}

TensorPtr dropout(Tape* t, const TensorPtr& x, double rate, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (rate == 0.0) return x;
    auto mask = std::make_shared<std::vector<double>>(x->size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 / (1.0 - rate);
    auto out = make_tensor(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) {
        (*mask)[i] = u(rng) < rate ? 0.0 : keep;
        out->data[i] = x->data[i] * (*mask)[i];
    }
    if (t) {
        t->record(out, [x, out, mask]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->size(); ++i)
                x->grad[i] += out->grad[i] * (*mask)[i];
        });
    }
    return out;
}

std::vector<std::vector<double>> finite_difference_gradient(
    const std::function<double()>& f, const std::vector<TensorPtr>& params, double eps) {
    if (eps <= 0) throw std::invalid_argument("finite_difference_gradient: eps must be positive");
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) {
        std::vector<double> g(p->size());
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double orig = p->data[i];
            p->data[i] = orig + eps;
            const double fp = f();
            p->data[i] = orig - eps;
            const double fm = f();
            p->data[i] = orig;
            g[i] = (fp - fm) / (2.0 * eps);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

}  // namespace hner
