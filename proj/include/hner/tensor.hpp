#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hner {

// Dense row-major f64 tensor. Rank is 1 or 2 everywhere in this project;
// a vector is stored as [1 x n].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;   // allocated lazily, same size as data
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> shp, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    int rows() const { return shape.size() == 2 ? shape[0] : 1; }
    int cols() const { return shape.empty() ? 0 : shape.back(); }

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }
    double& gat(int i, int j) { return grad[static_cast<std::size_t>(i) * cols() + j]; }

    void ensure_grad();
    void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, double fill = 0.0);
TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data);

// Records the forward pass; replaying the nodes in reverse accumulates
// gradients into every requires_grad tensor reachable from the loss.
class Tape {
public:
    struct Node {
        TensorPtr out;
        std::function<void()> backward;
    };

    void record(TensorPtr out, std::function<void()> backward) {
        nodes_.push_back({std::move(out), std::move(backward)});
    }
    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::vector<Node> nodes_;
};

// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients of
// intermediate (op output) tensors are reset first; leaf parameter gradients
// accumulate across calls. Throws if loss is not scalar.
void backward(const TensorPtr& loss, Tape& tape);

// ---- scalar/vector primitives ----

// log(sum(exp(s))) with max-shift. Throws on empty input or all -inf.
double logsumexp(const std::vector<double>& scores);

// Throws on empty input.
std::vector<double> softmax(const std::vector<double>& scores);

std::vector<double> layer_norm(const std::vector<double>& x,
                               const std::vector<double>& gamma,
                               const std::vector<double>& beta,
                               double eps = 1e-5);

double gelu(double x);
double gelu_grad(double x);

// ---- tape ops (tape may be null for inference-only evaluation) ----

TensorPtr add(Tape* t, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* t, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* t, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape* t, const TensorPtr& a, double s);

// [m x k] * [k x n]
TensorPtr matmul(Tape* t, const TensorPtr& a, const TensorPtr& b);
// [m x k] * [n x k]^T
TensorPtr matmul_nt(Tape* t, const TensorPtr& a, const TensorPtr& b);
// x*W + b with b broadcast over rows
TensorPtr linear(Tape* t, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

// Row-wise softmax over the first valid_cols columns; remaining columns are
// forced to zero. valid_cols <= 0 means all columns.
TensorPtr row_softmax(Tape* t, const TensorPtr& x, int valid_cols = 0);
TensorPtr row_layer_norm(Tape* t, const TensorPtr& x, const TensorPtr& gamma,
                         const TensorPtr& beta, double eps = 1e-5);
TensorPtr gelu_op(Tape* t, const TensorPtr& x);
TensorPtr sigmoid_op(Tape* t, const TensorPtr& x);
TensorPtr tanh_op(Tape* t, const TensorPtr& x);

TensorPtr gather_rows(Tape* t, const TensorPtr& x, const std::vector<int>& idx);
TensorPtr slice_cols(Tape* t, const TensorPtr& x, int start, int len);
TensorPtr concat_cols(Tape* t, const std::vector<TensorPtr>& parts);
TensorPtr stack_rows(Tape* t, const std::vector<TensorPtr>& rows);

// out[i][j] = mat[i][j] + vec[i]  (vec is [1 x rows])
TensorPtr bcast_add_col(Tape* t, const TensorPtr& mat, const TensorPtr& vec);
// out[i][j] = mat[i][j] + vec[j]
TensorPtr bcast_add_row(Tape* t, const TensorPtr& mat, const TensorPtr& vec);
// out[1 x n], out[j] = logsumexp over rows of column j
TensorPtr logsumexp_cols(Tape* t, const TensorPtr& mat);
// scalar logsumexp of a [1 x n] tensor
TensorPtr logsumexp_all(Tape* t, const TensorPtr& v);
TensorPtr sum_all(Tape* t, const TensorPtr& x);
// scalar pick of one entry
TensorPtr pick(Tape* t, const TensorPtr& x, int i, int j);

// Inverted-scale dropout; identity when rate == 0.
TensorPtr dropout(Tape* t, const TensorPtr& x, double rate, std::mt19937_64& rng);

// Central-difference gradient estimate of f over the given parameter tensors,
// in parameter order. f must be deterministic.
std::vector<std::vector<double>> finite_difference_gradient(
    const std::function<double()>& f, const std::vector<TensorPtr>& params,
    double eps = 1e-5);

}  // namespace hner
