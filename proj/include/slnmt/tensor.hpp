#pragma once

#include <cstddef>
#include <deque>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace slnmt::ad {

// Dense row-major array of doubles. Rank 1 and 2 cover everything the
// translation model needs; shape checks are explicit, no broadcasting
// beyond the add_rowvec bias case.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> data);

    static Tensor zeros(std::vector<int> s);
    static Tensor full(std::vector<int> s, double x);
    static Tensor vec(std::vector<double> data);
    static Tensor mat(int rows, int cols, std::vector<double> data);
    static Tensor scalar(double x);

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t numel() const { return v.size(); }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int i) { return v[static_cast<std::size_t>(i)]; }
    double at(int i) const { return v[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

std::string shape_str(const std::vector<int>& shape);

// ---------------------------------------------------------------------------
// Seeded randomness. Every stream is derived from one master seed by name so
// stages can be re-run independently without disturbing each other.
// ---------------------------------------------------------------------------

std::uint64_t stream_seed(std::uint64_t master, std::string_view stream);

// Uniform double in [0,1) built from the top 53 bits; identical on every
// platform, unlike std::uniform_real_distribution.
double uniform_unit(std::mt19937_64& rng);
double uniform_range(std::mt19937_64& rng, double lo, double hi);
void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi);

// Portable Fisher-Yates; std::shuffle is implementation-defined.
template <typename T>
void shuffle_vec(std::vector<T>& xs, std::mt19937_64& rng) {
    for (std::size_t i = xs.size(); i > 1; --i) {
        std::uint64_t bound = i;
        std::uint64_t r;
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        do {
            r = rng();
        } while (r >= limit);
        std::swap(xs[i - 1], xs[r % bound]);
    }
}

// ---------------------------------------------------------------------------
// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// node list backwards is a valid reverse topological order. One tape per
// thread; leaves may view external tensors (parameters) without copying.
// ---------------------------------------------------------------------------

class Tape {
public:
    using NodeId = int;

    // Leaf owning a copy of t. Gradient is tracked only when needs_grad.
    NodeId leaf(Tensor t, bool needs_grad = false);
    // Leaf viewing external storage (a model parameter). Caller keeps *p
    // alive for the lifetime of the tape.
    NodeId bind(const Tensor* p, bool needs_grad = true);

    NodeId matmul(NodeId a, NodeId b);
    NodeId matvec(NodeId m, NodeId x);   // [r x c] * [c] -> [r]
    NodeId vecmat(NodeId x, NodeId m);   // [r] * [r x c] -> [c]
    NodeId add(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId m, NodeId x);  // bias vector added to every row
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double s);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId softmax(NodeId x);            // stable, max-subtracted, rank 1
    NodeId concat(const std::vector<NodeId>& parts);  // rank 1 parts
    NodeId slice(NodeId x, int begin, int end);       // rank 1, half-open
    NodeId stack_rows(const std::vector<NodeId>& rows);
    NodeId mean_rows(NodeId m);
    NodeId embedding(NodeId table, int row);
    NodeId cross_entropy(NodeId dist, int target);    // -log(dist[target])
    NodeId add_n(const std::vector<NodeId>& xs);      // same-shape sum

    // Accumulates d(loss)/d(node) into every gradient-tracked node reachable
    // from loss. loss must be scalar.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const;
    // Gradient of a tracked node; zeros if the node did not participate in
    // the last backward pass.
    Tensor grad(NodeId id) const;
    double scalar(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor owned;
        const Tensor* view = nullptr;
        Tensor grad;  // empty until touched
        bool needs_grad = false;
        std::function<void(Tape&, NodeId)> back;
    };

    const Tensor& val(NodeId id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.view ? *n.view : n.owned;
    }
    Tensor& grad_buf(NodeId id);
    bool tracked(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    NodeId push(Tensor value, bool needs_grad, std::function<void(Tape&, NodeId)> back);

    // Deque keeps node references stable while later ops append.
    std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Adam with bias correction. Moment buffers are created lazily to match the
// parameter shapes and stay aligned with them afterwards.
// ---------------------------------------------------------------------------

struct AdamState {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace slnmt::ad
