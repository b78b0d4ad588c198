#include "slnmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace slnmt::ad {

static std::size_t shape_numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension in " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
    if (shape_numel(shape) != v.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(v.size()) + " values");
    }
}

Tensor Tensor::zeros(std::vector<int> s) {
    std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> s, double x) {
    std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, x));
}

Tensor Tensor::vec(std::vector<double> data) {
    int n = static_cast<int>(data.size());
    return Tensor({n}, std::move(data));
}

Tensor Tensor::mat(int rows, int cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::scalar(double x) {
    return Tensor({1}, {x});
}

bool Tensor::all_finite() const {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

std::uint64_t stream_seed(std::uint64_t master, std::string_view stream) {
    // FNV-1a over the stream name, then a splitmix64 finalizer mix.
    std::uint64_t h = 1469598103934665603ull ^ master;
    for (char c : stream) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi) {
    for (double& x : t.v) x = uniform_range(rng, lo, hi);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::NodeId Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, NodeId)> back) {
    Node n;
    n.owned = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor t, bool needs_grad) {
    return push(std::move(t), needs_grad, nullptr);
}

Tape::NodeId Tape::bind(const Tensor* p, bool needs_grad) {
    Node n;
    n.view = p;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Tape::value(NodeId id) const {
    return val(id);
}

double Tape::scalar(NodeId id) const {
    const Tensor& t = val(id);
    if (t.numel() != 1) throw std::logic_error("scalar: node has shape " + shape_str(t.shape));
    return t.v[0];
}

Tensor& Tape::grad_buf(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.v.empty()) n.grad = Tensor::zeros(val(id).shape);
    return n.grad;
}

Tensor Tape::grad(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.v.empty()) return Tensor::zeros(val(id).shape);
    return n.grad;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(A.shape) + " and " +
                                    shape_str(B.shape));
    }
    const int m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        for (int t = 0; t < k; ++t) {
            const double aik = A.at(i, t);
            if (aik == 0.0) continue;
            const double* brow = &B.v[static_cast<std::size_t>(t) * n];
            double* crow = &C.v[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    bool ng = tracked(a) || tracked(b);
    return push(std::move(C), ng, [a, b, m, k, n](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& A2 = tp.val(a);
        const Tensor& B2 = tp.val(b);
        if (tp.tracked(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (int t = 0; t < k; ++t) ga.at(i, t) += gij * B2.at(t, j);
                }
        }
        if (tp.tracked(b)) {
            Tensor& gb = tp.grad_buf(b);
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    const double ait = A2.at(i, t);
                    if (ait == 0.0) continue;
                    for (int j = 0; j < n; ++j) gb.at(t, j) += ait * g.at(i, j);
                }
        }
    });
}

Tape::NodeId Tape::matvec(NodeId m, NodeId x) {
    const Tensor& M = val(m);
    const Tensor& X = val(x);
    if (M.rank() != 2 || X.rank() != 1 || M.cols() != X.shape[0]) {
        throw std::invalid_argument("matvec: incompatible shapes " + shape_str(M.shape) + " and " +
                                    shape_str(X.shape));
    }
    const int r = M.rows(), c = M.cols();
    Tensor y = Tensor::zeros({r});
    for (int i = 0; i < r; ++i) {
        const double* row = &M.v[static_cast<std::size_t>(i) * c];
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += row[j] * X.v[static_cast<std::size_t>(j)];
        y.v[static_cast<std::size_t>(i)] = acc;
    }
    bool ng = tracked(m) || tracked(x);
    return push(std::move(y), ng, [m, x, r, c](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& M2 = tp.val(m);
        const Tensor& X2 = tp.val(x);
        if (tp.tracked(m)) {
            Tensor& gm = tp.grad_buf(m);
            for (int i = 0; i < r; ++i) {
                const double gi = g.at(i);
                if (gi == 0.0) continue;
                for (int j = 0; j < c; ++j) gm.at(i, j) += gi * X2.at(j);
            }
        }
        if (tp.tracked(x)) {
            Tensor& gx = tp.grad_buf(x);
            for (int i = 0; i < r; ++i) {
                const double gi = g.at(i);
                if (gi == 0.0) continue;
                for (int j = 0; j < c; ++j) gx.at(j) += gi * M2.at(i, j);
            }
        }
    });
}

Tape::NodeId Tape::vecmat(NodeId x, NodeId m) {
    const Tensor& X = val(x);
    const Tensor& M = val(m);
    if (X.rank() != 1 || M.rank() != 2 || X.shape[0] != M.rows()) {
        throw std::invalid_argument("vecmat: incompatible shapes " + shape_str(X.shape) + " and " +
                                    shape_str(M.shape));
    }
    const int r = M.rows(), c = M.cols();
    Tensor y = Tensor::zeros({c});
    for (int i = 0; i < r; ++i) {
        const double xi = X.at(i);
        if (xi == 0.0) continue;
        const double* row = &M.v[static_cast<std::size_t>(i) * c];
        for (int j = 0; j < c; ++j) y.v[static_cast<std::size_t>(j)] += xi * row[j];
    }
    bool ng = tracked(x) || tracked(m);
    return push(std::move(y), ng, [x, m, r, c](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& X2 = tp.val(x);
        const Tensor& M2 = tp.val(m);
        if (tp.tracked(x)) {
            Tensor& gx = tp.grad_buf(x);
            for (int i = 0; i < r; ++i) {
                double acc = 0.0;
                for (int j = 0; j < c; ++j) acc += M2.at(i, j) * g.at(j);
                gx.at(i) += acc;
            }
        }
        if (tp.tracked(m)) {
            Tensor& gm = tp.grad_buf(m);
            for (int i = 0; i < r; ++i) {
                const double xi = X2.at(i);
                if (xi == 0.0) continue;
                for (int j = 0; j < c; ++j) gm.at(i, j) += xi * g.at(j);
            }
        }
    });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) {
        throw std::invalid_argument("add: shape mismatch " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    }
    Tensor C = A;
    for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] += B.v[i];
    bool ng = tracked(a) || tracked(b);
    return push(std::move(C), ng, [a, b](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (tp.tracked(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        }
        if (tp.tracked(b)) {
            Tensor& gb = tp.grad_buf(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i];
        }
    });
}

Tape::NodeId Tape::add_rowvec(NodeId m, NodeId x) {
    const Tensor& M = val(m);
    const Tensor& X = val(x);
    if (M.rank() != 2 || X.rank() != 1 || M.cols() != X.shape[0]) {
        throw std::invalid_argument("add_rowvec: incompatible shapes " + shape_str(M.shape) + " and " +
                                    shape_str(X.shape));
    }
    Tensor C = M;
    const int r = M.rows(), c = M.cols();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) C.at(i, j) += X.at(j);
    bool ng = tracked(m) || tracked(x);
    return push(std::move(C), ng, [m, x, r, c](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (tp.tracked(m)) {
            Tensor& gm = tp.grad_buf(m);
            for (std::size_t i = 0; i < g.v.size(); ++i) gm.v[i] += g.v[i];
        }
        if (tp.tracked(x)) {
            Tensor& gx = tp.grad_buf(x);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) gx.at(j) += g.at(i, j);
        }
    });
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) {
        throw std::invalid_argument("mul: shape mismatch " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    }
    Tensor C = A;
    for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] *= B.v[i];
    bool ng = tracked(a) || tracked(b);
    return push(std::move(C), ng, [a, b](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& A2 = tp.val(a);
        const Tensor& B2 = tp.val(b);
        if (tp.tracked(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * B2.v[i];
        }
        if (tp.tracked(b)) {
            Tensor& gb = tp.grad_buf(b);
            for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * A2.v[i];
        }
    });
}

Tape::NodeId Tape::scale(NodeId a, double s) {
    Tensor C = val(a);
    for (double& x : C.v) x *= s;
    return push(std::move(C), tracked(a), [a, s](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (tp.tracked(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += s * g.v[i];
        }
    });
}

Tape::NodeId Tape::tanh(NodeId a) {
    Tensor C = val(a);
    for (double& x : C.v) x = std::tanh(x);
    return push(std::move(C), tracked(a), [a](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        if (tp.tracked(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
        }
    });
}

Tape::NodeId Tape::sigmoid(NodeId a) {
    Tensor C = val(a);
    for (double& x : C.v) x = 1.0 / (1.0 + std::exp(-x));
    return push(std::move(C), tracked(a), [a](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        if (tp.tracked(a)) {
            Tensor& ga = tp.grad_buf(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
        }
    });
}

Tape::NodeId Tape::softmax(NodeId x) {
    const Tensor& X = val(x);
    if (X.rank() != 1 || X.numel() == 0) {
        throw std::invalid_argument("softmax: needs a non-empty vector, got " + shape_str(X.shape));
    }
    Tensor y = X;
    double mx = *std::max_element(y.v.begin(), y.v.end());
    double sum = 0.0;
    for (double& e : y.v) {
        e = std::exp(e - mx);
        sum += e;
    }
    for (double& e : y.v) e /= sum;
    return push(std::move(y), tracked(x), [x](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y2 = tp.val(self);
        if (!tp.tracked(x)) return;
        double dot = 0.0;
        for (std::size_t i = 0; i < g.v.size(); ++i) dot += g.v[i] * y2.v[i];
        Tensor& gx = tp.grad_buf(x);
        for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] += y2.v[i] * (g.v[i] - dot);
    });
}

Tape::NodeId Tape::concat(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    std::vector<double> out;
    bool ng = false;
    for (NodeId p : parts) {
        const Tensor& t = val(p);
        if (t.rank() != 1) throw std::invalid_argument("concat: rank-1 inputs only, got " + shape_str(t.shape));
        out.insert(out.end(), t.v.begin(), t.v.end());
        ng = ng || tracked(p);
    }
    std::vector<NodeId> ps = parts;
    return push(Tensor::vec(std::move(out)), ng, [ps](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        std::size_t off = 0;
        for (NodeId p : ps) {
            const std::size_t n = tp.val(p).numel();
            if (tp.tracked(p)) {
                Tensor& gp = tp.grad_buf(p);
                for (std::size_t i = 0; i < n; ++i) gp.v[i] += g.v[off + i];
            }
            off += n;
        }
    });
}

Tape::NodeId Tape::slice(NodeId x, int begin, int end) {
    const Tensor& X = val(x);
    if (X.rank() != 1 || begin < 0 || end > X.shape[0] || begin >= end) {
        throw std::invalid_argument("slice: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                                    ") for " + shape_str(X.shape));
    }
    Tensor y = Tensor::vec(std::vector<double>(X.v.begin() + begin, X.v.begin() + end));
    return push(std::move(y), tracked(x), [x, begin](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (!tp.tracked(x)) return;
        Tensor& gx = tp.grad_buf(x);
        for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[static_cast<std::size_t>(begin) + i] += g.v[i];
    });
}

Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
    const int d = val(rows[0]).shape.at(0);
    std::vector<double> out;
    out.reserve(rows.size() * static_cast<std::size_t>(d));
    bool ng = false;
    for (NodeId r : rows) {
        const Tensor& t = val(r);
        if (t.rank() != 1 || t.shape[0] != d) {
            throw std::invalid_argument("stack_rows: row shape " + shape_str(t.shape) + " does not match [" +
                                        std::to_string(d) + "]");
        }
        out.insert(out.end(), t.v.begin(), t.v.end());
        ng = ng || tracked(r);
    }
    std::vector<NodeId> rs = rows;
    return push(Tensor::mat(static_cast<int>(rows.size()), d, std::move(out)), ng,
                [rs, d](Tape& tp, NodeId self) {
                    const Tensor& g = tp.grad_buf(self);
                    for (std::size_t r = 0; r < rs.size(); ++r) {
                        if (!tp.tracked(rs[r])) continue;
                        Tensor& gr = tp.grad_buf(rs[r]);
                        for (int j = 0; j < d; ++j) gr.v[static_cast<std::size_t>(j)] += g.v[r * d + j];
                    }
                });
}

Tape::NodeId Tape::mean_rows(NodeId m) {
    const Tensor& M = val(m);
    if (M.rank() != 2) throw std::invalid_argument("mean_rows: needs a matrix, got " + shape_str(M.shape));
    const int r = M.rows(), c = M.cols();
    Tensor y = Tensor::zeros({c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) y.at(j) += M.at(i, j);
    for (double& x : y.v) x /= r;
    return push(std::move(y), tracked(m), [m, r, c](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (!tp.tracked(m)) return;
        Tensor& gm = tp.grad_buf(m);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gm.at(i, j) += g.at(j) / r;
    });
}

Tape::NodeId Tape::embedding(NodeId table, int row) {
    const Tensor& T = val(table);
    if (T.rank() != 2) throw std::invalid_argument("embedding: table must be a matrix, got " + shape_str(T.shape));
    if (row < 0 || row >= T.rows()) {
        throw std::out_of_range("embedding: row " + std::to_string(row) + " out of range for " +
                                shape_str(T.shape));
    }
    const int c = T.cols();
    Tensor y = Tensor::vec(std::vector<double>(T.v.begin() + static_cast<std::size_t>(row) * c,
                                               T.v.begin() + static_cast<std::size_t>(row + 1) * c));
    return push(std::move(y), tracked(table), [table, row, c](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (!tp.tracked(table)) return;
        Tensor& gt = tp.grad_buf(table);
        for (int j = 0; j < c; ++j) gt.at(row, j) += g.at(j);
    });
}

Tape::NodeId Tape::cross_entropy(NodeId dist, int target) {
    const Tensor& D = val(dist);
    if (D.rank() != 1) throw std::invalid_argument("cross_entropy: distribution must be a vector");
    if (target < 0 || target >= D.shape[0]) {
        throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " out of range for " +
                                shape_str(D.shape));
    }
    Tensor y = Tensor::scalar(-std::log(D.at(target)));
    return push(std::move(y), tracked(dist), [dist, target](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        if (!tp.tracked(dist)) return;
        Tensor& gd = tp.grad_buf(dist);
        gd.at(target) += -g.v[0] / tp.val(dist).at(target);
    });
}

Tape::NodeId Tape::add_n(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_n: no inputs");
    Tensor C = val(xs[0]);
    bool ng = tracked(xs[0]);
    for (std::size_t k = 1; k < xs.size(); ++k) {
        const Tensor& t = val(xs[k]);
        if (!t.same_shape(C)) {
            throw std::invalid_argument("add_n: shape mismatch " + shape_str(C.shape) + " vs " +
                                        shape_str(t.shape));
        }
        for (std::size_t i = 0; i < C.v.size(); ++i) C.v[i] += t.v[i];
        ng = ng || tracked(xs[k]);
    }
    std::vector<NodeId> ids = xs;
    return push(std::move(C), ng, [ids](Tape& tp, NodeId self) {
        const Tensor& g = tp.grad_buf(self);
        for (NodeId x : ids) {
            if (!tp.tracked(x)) continue;
            Tensor& gx = tp.grad_buf(x);
            for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] += g.v[i];
        }
    });
}

void Tape::backward(NodeId loss) {
    const Tensor& L = val(loss);
    if (L.numel() != 1) {
        throw std::logic_error("backward: loss must be scalar, got " + shape_str(L.shape));
    }
    grad_buf(loss).v[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.back || n.grad.v.empty() || !n.needs_grad) continue;
        n.back(*this, id);
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " params vs " +
                                    std::to_string(grads.size()) + " grads");
    }
    if (state.m.empty()) {
        for (const Tensor& p : params) {
            state.m.push_back(Tensor::zeros(p.shape));
            state.v.push_back(Tensor::zeros(p.shape));
        }
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].same_shape(grads[k]) || !params[k].same_shape(state.m[k])) {
            throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(k) + ": " +
                                        shape_str(params[k].shape) + " vs " + shape_str(grads[k].shape));
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        const Tensor& g = grads[k];
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = state.beta1 * m.v[i] + (1.0 - state.beta1) * g.v[i];
            v.v[i] = state.beta2 * v.v[i] + (1.0 - state.beta2) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace slnmt::ad
