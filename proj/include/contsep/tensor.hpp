#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "contsep/rng.hpp"

namespace contsep {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily, kept across backward calls
    bool requires_grad = false;
    bool is_leaf = true;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

}  // namespace detail

// Handle to a node of the computation graph. Copies share the node. All math
// is double precision; gradients flow in reverse through whatever ops built
// the value.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor from_data(Shape shape, std::vector<double> values);
    static Tensor randn(Shape shape, Rng& rng);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->values.size()); }
    std::int64_t dim(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool value);
    bool is_leaf() const { return node_->is_leaf; }

    std::span<const double> values() const { return node_->values; }
    double* mutable_data();  // leaf-only, for optimizer updates
    std::span<const double> grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad();

    double item() const;
    double at(std::initializer_list<std::int64_t> idx) const;

    // Constant copy cut off from the graph.
    Tensor detach() const;
    // Fresh leaf with copied values (used for model cloning).
    Tensor clone_leaf(bool requires_grad) const;

    detail::TensorNode* node() const { return node_.get(); }
    std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Elementwise with trailing-dimension broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor log1p(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor narrow(const Tensor& a, int axis, std::int64_t start, std::int64_t len);
Tensor row(const Tensor& a, std::int64_t index);        // [n,d] -> [d]
Tensor stack_rows(const std::vector<Tensor>& rows);     // n x [d] -> [n,d]

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis, bool keepdim);
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);
Tensor l2_normalize(const Tensor& a, int axis);

// Reverse pass from a scalar ([] or [1]) root. Leaf grads accumulate across
// calls; clear them with zero_grad between optimization steps.
void backward(const Tensor& root);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

}  // namespace contsep
