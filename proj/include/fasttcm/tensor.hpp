#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fasttcm/errors.hpp"

namespace ftcm {

using Shape = std::vector<size_t>;

inline size_t numel(const Shape& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

class Graph;

namespace detail {

// Allocator that default-initializes doubles; lets op outputs skip the
// zero-fill when every element is overwritten anyway.
template <class T>
struct uninit_alloc : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = uninit_alloc<U>;
    };
    template <class U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

using DVec = std::vector<double, uninit_alloc<double>>;

struct TensorImpl {
    Shape shape;
    DVec data;
    std::vector<double> grad; // allocated lazily, leaves only
    bool requires_grad = false;
    Graph* graph = nullptr;              // set while owned by a live tape node
    std::optional<size_t> node_id;       // index into the owning tape
};

} // namespace detail

// Dense float64 tensor, row-major, value semantics over a shared buffer.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : impl(std::make_shared<detail::TensorImpl>()) {
        impl->shape = std::move(shape);
        impl->data.assign(numel(impl->shape), fill);
    }

    // Allocates without zero-filling; caller must overwrite every element.
    static Tensor uninitialized(Shape shape) {
        Tensor t;
        t.impl = std::make_shared<detail::TensorImpl>();
        t.impl->shape = std::move(shape);
        t.impl->data.resize(numel(t.impl->shape));
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t{Shape{}};
        t.impl->data[0] = v;
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<double> data) {
        if (numel(shape) != data.size())
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t = uninitialized(std::move(shape));
        std::copy(data.begin(), data.end(), t.impl->data.begin());
        return t;
    }

    bool defined() const { return static_cast<bool>(impl); }

    const Shape& shape() const { return impl->shape; }
    size_t rank() const { return impl->shape.size(); }
    size_t size() const { return impl->data.size(); }
    size_t dim(size_t i) const { return impl->shape.at(i); }

    std::span<double> values() { return impl->data; }
    std::span<const double> values() const { return impl->data; }
    double* data() { return impl->data.data(); }
    const double* data() const { return impl->data.data(); }

    double item() const {
        if (size() != 1)
            throw ShapeError("item() requires a single-element tensor, got shape " +
                             shape_str(shape()));
        return impl->data[0];
    }

    double& at(size_t i) { return impl->data[i]; }
    double at(size_t i) const { return impl->data[i]; }
    double& at(size_t i, size_t j) { return impl->data[i * impl->shape[1] + j]; }
    double at(size_t i, size_t j) const { return impl->data[i * impl->shape[1] + j]; }
    double& at(size_t i, size_t j, size_t k) {
        return impl->data[(i * impl->shape[1] + j) * impl->shape[2] + k];
    }
    double at(size_t i, size_t j, size_t k) const {
        return impl->data[(i * impl->shape[1] + j) * impl->shape[2] + k];
    }

    bool requires_grad() const { return impl->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        impl->requires_grad = rg;
        return *this;
    }

    bool has_grad() const { return !impl->grad.empty(); }
    std::span<const double> grad() const { return impl->grad; }
    std::span<double> grad() { return impl->grad; }
    void zero_grad() { impl->grad.clear(); }

    // Deep copy of values; the copy is a detached leaf.
    Tensor clone() const {
        Tensor t = uninitialized(impl->shape);
        std::copy(impl->data.begin(), impl->data.end(), t.impl->data.begin());
        t.impl->requires_grad = impl->requires_grad;
        return t;
    }

    std::shared_ptr<detail::TensorImpl> impl;
};

// Reverse-mode tape. Constructing a Graph makes it the active tape on this
// thread; operations on tensors that require grad record backward closures in
// construction order, and backward() replays them in exact reverse order.
class Graph {
public:
    using PullFn = std::function<void(Graph&, const std::vector<double>&)>;

    Graph() : prev_(tls_current()) { tls_current() = this; }

    ~Graph() {
        for (auto& n : nodes_) {
            if (n.out->graph == this) {
                n.out->graph = nullptr;
                n.out->node_id.reset();
            }
        }
        tls_current() = prev_;
    }

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    static Graph* current() { return tls_current(); }

    size_t node_count() const { return nodes_.size(); }

    void record(std::shared_ptr<detail::TensorImpl> out, PullFn fn) {
        out->graph = this;
        out->node_id = nodes_.size();
        nodes_.push_back(Node{std::move(out), std::move(fn)});
    }

    // Accumulate a gradient contribution for `t`. Tape-produced tensors get a
    // transient per-pass slot; leaves accumulate into their persistent grad.
    void accumulate(const std::shared_ptr<detail::TensorImpl>& t, const double* g,
                    size_t n) {
        if (t->graph == this && t->node_id) {
            auto& slot = tgrad_[*t->node_id];
            if (slot.empty()) slot.assign(n, 0.0);
            for (size_t i = 0; i < n; ++i) slot[i] += g[i];
        } else if (t->requires_grad) {
            if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
            for (size_t i = 0; i < n; ++i) t->grad[i] += g[i];
        }
    }

    void accumulate(const std::shared_ptr<detail::TensorImpl>& t,
                    const std::vector<double>& g) {
        accumulate(t, g.data(), g.size());
    }

    // Populates grad on every requires_grad leaf reachable from `loss`.
    // Repeated calls accumulate.
    void backward(const Tensor& loss) {
        if (loss.size() != 1)
            throw ShapeError("backward requires a scalar loss, got shape " +
                             shape_str(loss.shape()));
        if (loss.impl->graph != nullptr && loss.impl->graph != this)
            throw Error("backward: loss belongs to a different graph");
        tgrad_.assign(nodes_.size(), {});
        const double one = 1.0;
        accumulate(loss.impl, &one, 1);
        for (size_t i = nodes_.size(); i-- > 0;) {
            if (!tgrad_[i].empty()) nodes_[i].pull(*this, tgrad_[i]);
        }
        tgrad_.clear();
    }

private:
    struct Node {
        std::shared_ptr<detail::TensorImpl> out;
        PullFn pull;
    };

    static Graph*& tls_current() {
        thread_local Graph* cur = nullptr;
        return cur;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> tgrad_;
    Graph* prev_ = nullptr;
};

} // namespace ftcm
