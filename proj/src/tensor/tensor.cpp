#include "contsep/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "contsep/error.hpp"
#include "contsep/kernels.hpp"

namespace contsep {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (const auto d : s) n *= d;
    return n;
}

namespace {

const kernels::KernelTable& K() { return kernels::active(); }

void validate_shape(const Shape& s, const char* what) {
    for (const auto d : s) {
        if (d <= 0) throw DimensionError(std::string(what) + ": non-positive dimension in " + shape_str(s));
    }
}

NodePtr make_leaf(Shape shape, std::vector<double> values) {
    validate_shape(shape, "tensor");
    auto node = std::make_shared<TensorNode>();
    if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    }
    node->shape = std::move(shape);
    node->values = std::move(values);
    return node;
}

NodePtr make_op_node(Shape shape, std::vector<NodePtr> parents, const char* op) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values.resize(static_cast<std::size_t>(shape_numel(node->shape)));
    node->is_leaf = false;
    node->op = op;
    for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
    node->parents = std::move(parents);
    return node;
}

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

Shape pad_shape(const Shape& s, std::size_t rank) {
    Shape out(rank, 1);
    std::copy(s.begin(), s.end(), out.begin() + (rank - s.size()));
    return out;
}

// ---- broadcasting ------------------------------------------------------

struct BinaryFns {
    void (*vv)(const double*, const double*, double*, std::size_t);
    void (*vs)(const double*, double, double*, std::size_t);
    void (*sv)(double, const double*, double*, std::size_t);
};

void div_vs_adapter(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / s;
}
void add_sv_adapter(double s, const double* a, double* out, std::size_t n) {
    K().add_vs(a, s, out, n);
}
void mul_sv_adapter(double s, const double* a, double* out, std::size_t n) {
    K().mul_vs(a, s, out, n);
}

BinaryFns add_fns() { return {K().add, K().add_vs, add_sv_adapter}; }
BinaryFns sub_fns() { return {K().sub, K().sub_vs, K().sub_sv}; }
BinaryFns mul_fns() { return {K().mul, K().mul_vs, mul_sv_adapter}; }
BinaryFns div_fns() { return {K().div, div_vs_adapter, K().div_sv}; }

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    const Shape pa = pad_shape(a, rank);
    const Shape pb = pad_shape(b, rank);
    Shape out(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        if (pa[d] == pb[d]) {
            out[d] = pa[d];
        } else if (pa[d] == 1) {
            out[d] = pb[d];
        } else if (pb[d] == 1) {
            out[d] = pa[d];
        } else {
            throw DimensionError("shapes not broadcast-compatible: " + shape_str(a) + " vs " +
                                 shape_str(b));
        }
    }
    return out;
}

// Applies `fns` over broadcast operands: odometer over outer dims, one kernel
// call per contiguous inner run.
void broadcast_apply(const double* a, const Shape& ashape, const double* b, const Shape& bshape,
                     double* out, const Shape& oshape, const BinaryFns& fns) {
    const std::size_t rank = oshape.size();
    const Shape pa = pad_shape(ashape, rank);
    const Shape pb = pad_shape(bshape, rank);

    // Longest usable suffix per mode.
    std::int64_t run_vv = 1, run_vs = 1, run_sv = 1;
    bool ok_vv = true, ok_vs = true, ok_sv = true;
    int cut_vv = static_cast<int>(rank), cut_vs = cut_vv, cut_sv = cut_vv;
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
        const bool trivial = oshape[d] == 1;
        if (ok_vv && (trivial || (pa[d] == oshape[d] && pb[d] == oshape[d]))) {
            run_vv *= oshape[d];
            cut_vv = d;
        } else {
            ok_vv = false;
        }
        if (ok_vs && (trivial || (pa[d] == oshape[d] && pb[d] == 1))) {
            run_vs *= oshape[d];
            cut_vs = d;
        } else {
            ok_vs = false;
        }
        if (ok_sv && (trivial || (pb[d] == oshape[d] && pa[d] == 1))) {
            run_sv *= oshape[d];
            cut_sv = d;
        } else {
            ok_sv = false;
        }
    }

    enum class Mode { VV, VS, SV } mode = Mode::VV;
    std::int64_t run = run_vv;
    int cut = cut_vv;
    if (run_vs > run) {
        mode = Mode::VS;
        run = run_vs;
        cut = cut_vs;
    }
    if (run_sv > run) {
        mode = Mode::SV;
        run = run_sv;
        cut = cut_sv;
    }

    const auto ostr = contiguous_strides(oshape);
    const auto astr_full = contiguous_strides(pa);
    const auto bstr_full = contiguous_strides(pb);
    std::vector<std::int64_t> odims(oshape.begin(), oshape.begin() + cut);
    std::vector<std::int64_t> astr(cut), bstr(cut), ostrv(cut);
    for (int d = 0; d < cut; ++d) {
        astr[d] = pa[d] == 1 ? 0 : astr_full[d];
        bstr[d] = pb[d] == 1 ? 0 : bstr_full[d];
        ostrv[d] = ostr[d];
    }

    std::vector<std::int64_t> idx(cut, 0);
    const std::int64_t outer = shape_numel(odims);
    std::int64_t aoff = 0, boff = 0, ooff = 0;
    for (std::int64_t it = 0; it < outer; ++it) {
        switch (mode) {
            case Mode::VV: fns.vv(a + aoff, b + boff, out + ooff, static_cast<std::size_t>(run)); break;
            case Mode::VS: fns.vs(a + aoff, b[boff], out + ooff, static_cast<std::size_t>(run)); break;
            case Mode::SV: fns.sv(a[aoff], b + boff, out + ooff, static_cast<std::size_t>(run)); break;
        }
        for (int d = cut - 1; d >= 0; --d) {
            ++idx[d];
            aoff += astr[d];
            boff += bstr[d];
            ooff += ostrv[d];
            if (idx[d] < odims[d]) break;
            aoff -= astr[d] * odims[d];
            boff -= bstr[d] * odims[d];
            ooff -= ostrv[d] * odims[d];
            idx[d] = 0;
        }
    }
}

// acc(target shape) += alpha * g(gshape), summing over dims broadcast away.
void reduce_grad_into(const double* g, const Shape& gshape, double alpha, double* acc,
                      const Shape& target) {
    const std::size_t rank = gshape.size();
    const Shape pt = pad_shape(target, rank);

    if (pt == gshape) {
        K().axpy(alpha, g, acc, static_cast<std::size_t>(shape_numel(gshape)));
        return;
    }

    // Suffix where target matches g: vector accumulate per run. Suffix where
    // target is all ones: scalar accumulate of a summed run.
    std::int64_t run_match = 1, run_ones = 1;
    bool ok_match = true, ok_ones = true;
    int cut_match = static_cast<int>(rank), cut_ones = cut_match;
    for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
        if (ok_match && pt[d] == gshape[d]) {
            run_match *= gshape[d];
            cut_match = d;
        } else {
            ok_match = false;
        }
        if (ok_ones && pt[d] == 1) {
            run_ones *= gshape[d];
            cut_ones = d;
        } else {
            ok_ones = false;
        }
    }
    const bool ones_mode = run_ones > run_match;
    const std::int64_t run = ones_mode ? run_ones : run_match;
    const int cut = ones_mode ? cut_ones : cut_match;

    const auto gstr = contiguous_strides(gshape);
    const auto tstr_full = contiguous_strides(pt);
    std::vector<std::int64_t> odims(gshape.begin(), gshape.begin() + cut);
    std::vector<std::int64_t> tstr(cut), gstrv(cut);
    for (int d = 0; d < cut; ++d) {
        tstr[d] = pt[d] == 1 ? 0 : tstr_full[d];
        gstrv[d] = gstr[d];
    }

    std::vector<std::int64_t> idx(cut, 0);
    const std::int64_t outer = shape_numel(odims);
    std::int64_t goff = 0, toff = 0;
    for (std::int64_t it = 0; it < outer; ++it) {
        if (ones_mode) {
            acc[toff] += alpha * K().sum(g + goff, static_cast<std::size_t>(run));
        } else {
            K().axpy(alpha, g + goff, acc + toff, static_cast<std::size_t>(run));
        }
        for (int d = cut - 1; d >= 0; --d) {
            ++idx[d];
            goff += gstrv[d];
            toff += tstr[d];
            if (idx[d] < odims[d]) break;
            goff -= gstrv[d] * odims[d];
            toff -= tstr[d] * odims[d];
            idx[d] = 0;
        }
    }
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& ta, const Tensor& tb, BinOp op, const char* name) {
    auto a = ta.node_ptr();
    auto b = tb.node_ptr();
    Shape oshape = broadcast_shape(a->shape, b->shape);
    auto node = make_op_node(oshape, {a, b}, name);
    BinaryFns fns = op == BinOp::Add   ? add_fns()
                    : op == BinOp::Sub ? sub_fns()
                    : op == BinOp::Mul ? mul_fns()
                                       : div_fns();
    broadcast_apply(a->values.data(), a->shape, b->values.data(), b->shape, node->values.data(),
                    node->shape, fns);
    if (node->requires_grad) {
        node->backward_fn = [op](TensorNode& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            const double* g = self.grad.data();
            const Shape& gs = self.shape;
            switch (op) {
                case BinOp::Add:
                    if (pa->requires_grad) {
                        pa->ensure_grad();
                        reduce_grad_into(g, gs, 1.0, pa->grad.data(), pa->shape);
                    }
                    if (pb->requires_grad) {
                        pb->ensure_grad();
                        reduce_grad_into(g, gs, 1.0, pb->grad.data(), pb->shape);
                    }
                    break;
                case BinOp::Sub:
                    if (pa->requires_grad) {
                        pa->ensure_grad();
                        reduce_grad_into(g, gs, 1.0, pa->grad.data(), pa->shape);
                    }
                    if (pb->requires_grad) {
                        pb->ensure_grad();
                        reduce_grad_into(g, gs, -1.0, pb->grad.data(), pb->shape);
                    }
                    break;
                case BinOp::Mul: {
                    std::vector<double> tmp(self.values.size());
                    if (pa->requires_grad) {
                        pa->ensure_grad();
                        broadcast_apply(g, gs, pb->values.data(), pb->shape, tmp.data(), gs,
                                        mul_fns());
                        reduce_grad_into(tmp.data(), gs, 1.0, pa->grad.data(), pa->shape);
                    }
                    if (pb->requires_grad) {
                        pb->ensure_grad();
                        broadcast_apply(g, gs, pa->values.data(), pa->shape, tmp.data(), gs,
                                        mul_fns());
                        reduce_grad_into(tmp.data(), gs, 1.0, pb->grad.data(), pb->shape);
                    }
                    break;
                }
                case BinOp::Div: {
                    std::vector<double> tmp(self.values.size());
                    if (pa->requires_grad) {
                        pa->ensure_grad();
                        broadcast_apply(g, gs, pb->values.data(), pb->shape, tmp.data(), gs,
                                        div_fns());
                        reduce_grad_into(tmp.data(), gs, 1.0, pa->grad.data(), pa->shape);
                    }
                    if (pb->requires_grad) {
                        pb->ensure_grad();
                        // d/db (a/b) = -out/b
                        K().mul(g, self.values.data(), tmp.data(), tmp.size());
                        std::vector<double> tmp2(self.values.size());
                        broadcast_apply(tmp.data(), gs, pb->values.data(), pb->shape, tmp2.data(),
                                        gs, div_fns());
                        pb->ensure_grad();
                        reduce_grad_into(tmp2.data(), gs, -1.0, pb->grad.data(), pb->shape);
                    }
                    break;
                }
            }
        };
    }
    return Tensor(node);
}

void check_finite(const TensorNode& node, const char* opname) {
    for (const double v : node.values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + opname);
        }
    }
}

}  // namespace

// ---- creation ----------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0)));
}
Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }
Tensor Tensor::full(Shape shape, double value) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value)));
}
Tensor Tensor::scalar(double value) { return Tensor(make_leaf(Shape{}, {value})); }
Tensor Tensor::from_data(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values)));
}
Tensor Tensor::randn(Shape shape, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.normal();
    return Tensor(make_leaf(std::move(shape), std::move(v)));
}
Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(make_leaf(std::move(shape), std::move(v)));
}

Tensor& Tensor::set_requires_grad(bool value) {
    if (!node_->is_leaf) throw ContractError("requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = value;
    return *this;
}

double* Tensor::mutable_data() {
    if (!node_->is_leaf) throw ContractError("mutable_data is only available on leaf tensors");
    return node_->values.data();
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() requires a single-element tensor, got shape " +
                                          shape_str(node_->shape));
    return node_->values[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    const auto& s = node_->shape;
    if (idx.size() != s.size()) throw DimensionError("index rank mismatch for shape " + shape_str(s));
    std::int64_t off = 0;
    std::size_t d = 0;
    const auto str = contiguous_strides(s);
    for (const auto i : idx) {
        if (i < 0 || i >= s[d]) throw DimensionError("index out of range for shape " + shape_str(s));
        off += i * str[d];
        ++d;
    }
    return node_->values[static_cast<std::size_t>(off)];
}

Tensor Tensor::detach() const {
    return Tensor(make_leaf(node_->shape, node_->values));
}

Tensor Tensor::clone_leaf(bool requires_grad) const {
    Tensor t(make_leaf(node_->shape, node_->values));
    t.node()->requires_grad = requires_grad;
    return t;
}

// ---- elementwise -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Div, "div"); }

Tensor add_scalar(const Tensor& a, double s) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "add_scalar");
    K().add_vs(pa->values.data(), s, node->values.data(), node->values.size());
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().axpy(1.0, self.grad.data(), p->grad.data(), self.grad.size());
        };
    }
    return Tensor(node);
}

Tensor mul_scalar(const Tensor& a, double s) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "mul_scalar");
    K().mul_vs(pa->values.data(), s, node->values.data(), node->values.size());
    if (node->requires_grad) {
        node->backward_fn = [s](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().axpy(s, self.grad.data(), p->grad.data(), self.grad.size());
        };
    }
    return Tensor(node);
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor abs(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "abs");
    K().vabs(pa->values.data(), node->values.data(), node->values.size());
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().abs_bwd(p->values.data(), self.grad.data(), p->grad.data(), self.grad.size());
        };
    }
    return Tensor(node);
}

Tensor relu(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "relu");
    K().vrelu(pa->values.data(), node->values.data(), node->values.size());
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().relu_bwd(p->values.data(), self.grad.data(), p->grad.data(), self.grad.size());
        };
    }
    return Tensor(node);
}

Tensor exp(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "exp");
    for (std::size_t i = 0; i < node->values.size(); ++i) node->values[i] = std::exp(pa->values[i]);
    check_finite(*node, "exp");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().fmadd(self.grad.data(), self.values.data(), p->grad.data(), self.grad.size());
        };
    }
    return Tensor(node);
}

Tensor log(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "log");
    for (std::size_t i = 0; i < node->values.size(); ++i) node->values[i] = std::log(pa->values[i]);
    check_finite(*node, "log");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                p->grad[i] += self.grad[i] / p->values[i];
        };
    }
    return Tensor(node);
}

Tensor log1p(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "log1p");
    for (std::size_t i = 0; i < node->values.size(); ++i)
        node->values[i] = std::log1p(pa->values[i]);
    check_finite(*node, "log1p");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                p->grad[i] += self.grad[i] / (1.0 + p->values[i]);
        };
    }
    return Tensor(node);
}

Tensor sigmoid(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(pa->shape, {pa}, "sigmoid");
    for (std::size_t i = 0; i < node->values.size(); ++i) {
        const double x = pa->values[i];
        node->values[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                   : std::exp(x) / (1.0 + std::exp(x));
    }
    check_finite(*node, "sigmoid");
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.values[i];
                p->grad[i] += self.grad[i] * y * (1.0 - y);
            }
        };
    }
    return Tensor(node);
}

// ---- matmul ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    if (pa->shape.size() != 2 || pb->shape.size() != 2) {
        throw DimensionError("matmul expects rank-2 operands, got " + shape_str(pa->shape) +
                             " and " + shape_str(pb->shape));
    }
    const std::int64_t m = pa->shape[0], k = pa->shape[1];
    const std::int64_t k2 = pb->shape[0], n = pb->shape[1];
    if (k != k2) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_str(pa->shape) + " vs " +
                             shape_str(pb->shape));
    }
    auto node = make_op_node({m, n}, {pa, pb}, "matmul");
    K().gemm_nn(pa->values.data(), pb->values.data(), node->values.data(),
                static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                static_cast<std::size_t>(k), false);
    if (node->requires_grad) {
        node->backward_fn = [m, n, k](TensorNode& self) {
            auto& pa2 = self.parents[0];
            auto& pb2 = self.parents[1];
            if (pa2->requires_grad) {
                pa2->ensure_grad();
                // dA += dC * B^T
                K().gemm_nt(self.grad.data(), pb2->values.data(), pa2->grad.data(),
                            static_cast<std::size_t>(m), static_cast<std::size_t>(k),
                            static_cast<std::size_t>(n), true);
            }
            if (pb2->requires_grad) {
                pb2->ensure_grad();
                // dB += A^T * dC
                K().gemm_tn(pa2->values.data(), self.grad.data(), pb2->grad.data(),
                            static_cast<std::size_t>(k), static_cast<std::size_t>(n),
                            static_cast<std::size_t>(m), true);
            }
        };
    }
    return Tensor(node);
}

// ---- shape ops ---------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    auto pa = a.node_ptr();
    validate_shape(shape, "reshape");
    if (shape_numel(shape) != shape_numel(pa->shape)) {
        throw DimensionError("reshape " + shape_str(pa->shape) + " -> " + shape_str(shape) +
                             " changes element count");
    }
    auto node = make_op_node(std::move(shape), {pa}, "reshape");
    std::memcpy(node->values.data(), pa->values.data(), node->values.size() * sizeof(double));
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().axpy(1.0, self.grad.data(), p->grad.data(), self.grad.size());
        };
    }
    return Tensor(node);
}

namespace {

// dst (out shape) = src permuted; accumulate adds instead of overwriting.
void permute_copy(const double* src, const Shape& sshape, double* dst,
                  const std::vector<int>& perm, bool accumulate) {
    const std::size_t rank = sshape.size();
    Shape oshape(rank);
    for (std::size_t d = 0; d < rank; ++d) oshape[d] = sshape[perm[d]];
    const auto sstr = contiguous_strides(sshape);
    std::vector<std::int64_t> src_stride(rank);
    for (std::size_t d = 0; d < rank; ++d) src_stride[d] = sstr[perm[d]];

    const std::int64_t total = shape_numel(oshape);
    // Fast path: permutation keeps the innermost axis, runs stay contiguous.
    if (rank > 0 && perm[rank - 1] == static_cast<int>(rank) - 1) {
        const std::int64_t run = oshape[rank - 1];
        std::vector<std::int64_t> idx(rank - 1, 0);
        std::int64_t soff = 0;
        for (std::int64_t it = 0; it < total / std::max<std::int64_t>(run, 1); ++it) {
            if (accumulate) {
                K().axpy(1.0, src + soff, dst, static_cast<std::size_t>(run));
            } else {
                std::memcpy(dst, src + soff, static_cast<std::size_t>(run) * sizeof(double));
            }
            dst += run;
            for (int d = static_cast<int>(rank) - 2; d >= 0; --d) {
                ++idx[d];
                soff += src_stride[d];
                if (idx[d] < oshape[d]) break;
                soff -= src_stride[d] * oshape[d];
                idx[d] = 0;
            }
        }
        return;
    }
    std::vector<std::int64_t> idx(rank, 0);
    std::int64_t soff = 0;
    for (std::int64_t it = 0; it < total; ++it) {
        if (accumulate) {
            dst[it] += src[soff];
        } else {
            dst[it] = src[soff];
        }
        for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
            ++idx[d];
            soff += src_stride[d];
            if (idx[d] < oshape[d]) break;
            soff -= src_stride[d] * oshape[d];
            idx[d] = 0;
        }
    }
}

std::vector<int> inverse_perm(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (std::size_t d = 0; d < perm.size(); ++d) inv[perm[d]] = static_cast<int>(d);
    return inv;
}

}  // namespace

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
    auto pa = a.node_ptr();
    const std::size_t rank = pa->shape.size();
    if (perm.size() != rank) throw DimensionError("permute rank mismatch for " + shape_str(pa->shape));
    std::vector<bool> seen(rank, false);
    for (const int p : perm) {
        if (p < 0 || static_cast<std::size_t>(p) >= rank || seen[p])
            throw DimensionError("invalid permutation for shape " + shape_str(pa->shape));
        seen[p] = true;
    }
    Shape oshape(rank);
    for (std::size_t d = 0; d < rank; ++d) oshape[d] = pa->shape[perm[d]];
    auto node = make_op_node(std::move(oshape), {pa}, "permute");
    permute_copy(pa->values.data(), pa->shape, node->values.data(), perm, false);
    if (node->requires_grad) {
        const auto inv = inverse_perm(perm);
        node->backward_fn = [inv](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            permute_copy(self.grad.data(), self.shape, p->grad.data(), inv, true);
        };
    }
    return Tensor(node);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    std::vector<NodePtr> parents;
    parents.reserve(parts.size());
    for (const auto& t : parts) parents.push_back(t.node_ptr());
    const Shape& first = parents[0]->shape;
    const int rank = static_cast<int>(first.size());
    if (axis < 0 || axis >= rank) throw DimensionError("concat axis out of range");
    Shape oshape = first;
    for (std::size_t i = 1; i < parents.size(); ++i) {
        const Shape& s = parents[i]->shape;
        if (static_cast<int>(s.size()) != rank)
            throw DimensionError("concat rank mismatch: " + shape_str(first) + " vs " + shape_str(s));
        for (int d = 0; d < rank; ++d) {
            if (d != axis && s[d] != first[d])
                throw DimensionError("concat shape mismatch: " + shape_str(first) + " vs " +
                                     shape_str(s));
        }
        oshape[axis] += s[axis];
    }
    auto node = make_op_node(oshape, std::move(parents), "concat");

    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= oshape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= oshape[d];
    const std::int64_t ostride = oshape[axis] * inner;
    std::int64_t off = 0;
    for (const auto& p : node->parents) {
        const std::int64_t len = p->shape[axis] * inner;
        for (std::int64_t o = 0; o < outer; ++o) {
            std::memcpy(node->values.data() + o * ostride + off, p->values.data() + o * len,
                        static_cast<std::size_t>(len) * sizeof(double));
        }
        off += len;
    }
    if (node->requires_grad) {
        node->backward_fn = [outer, inner, ostride, axis](TensorNode& self) {
            std::int64_t off2 = 0;
            for (auto& p : self.parents) {
                const std::int64_t len = p->shape[axis] * inner;
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::int64_t o = 0; o < outer; ++o) {
                        K().axpy(1.0, self.grad.data() + o * ostride + off2, p->grad.data() + o * len,
                                 static_cast<std::size_t>(len));
                    }
                }
                off2 += len;
            }
        };
    }
    return Tensor(node);
}

Tensor narrow(const Tensor& a, int axis, std::int64_t start, std::int64_t len) {
    auto pa = a.node_ptr();
    const int rank = static_cast<int>(pa->shape.size());
    if (axis < 0 || axis >= rank) throw DimensionError("narrow axis out of range");
    if (start < 0 || len <= 0 || start + len > pa->shape[axis])
        throw DimensionError("narrow range invalid for shape " + shape_str(pa->shape));
    Shape oshape = pa->shape;
    oshape[axis] = len;
    auto node = make_op_node(std::move(oshape), {pa}, "narrow");
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= pa->shape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= pa->shape[d];
    const std::int64_t sstride = pa->shape[axis] * inner;
    const std::int64_t run = len * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
        std::memcpy(node->values.data() + o * run, pa->values.data() + o * sstride + start * inner,
                    static_cast<std::size_t>(run) * sizeof(double));
    }
    if (node->requires_grad) {
        node->backward_fn = [outer, inner, sstride, start, run](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o) {
                K().axpy(1.0, self.grad.data() + o * run, p->grad.data() + o * sstride + start * inner,
                         static_cast<std::size_t>(run));
            }
        };
    }
    return Tensor(node);
}

Tensor row(const Tensor& a, std::int64_t index) {
    auto pa = a.node_ptr();
    if (pa->shape.size() != 2) throw DimensionError("row expects a rank-2 tensor, got " +
                                                    shape_str(pa->shape));
    if (index < 0 || index >= pa->shape[0]) throw DimensionError("row index out of range");
    const std::int64_t d = pa->shape[1];
    auto node = make_op_node({d}, {pa}, "row");
    std::memcpy(node->values.data(), pa->values.data() + index * d,
                static_cast<std::size_t>(d) * sizeof(double));
    if (node->requires_grad) {
        node->backward_fn = [index, d](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().axpy(1.0, self.grad.data(), p->grad.data() + index * d, static_cast<std::size_t>(d));
        };
    }
    return Tensor(node);
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw DimensionError("stack_rows of zero tensors");
    std::vector<NodePtr> parents;
    parents.reserve(rows.size());
    const std::int64_t d = shape_numel(rows[0].shape());
    for (const auto& t : rows) {
        if (shape_numel(t.shape()) != d)
            throw DimensionError("stack_rows length mismatch: " + shape_str(rows[0].shape()) +
                                 " vs " + shape_str(t.shape()));
        parents.push_back(t.node_ptr());
    }
    auto node = make_op_node({static_cast<std::int64_t>(rows.size()), d}, std::move(parents),
                             "stack_rows");
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
        std::memcpy(node->values.data() + static_cast<std::int64_t>(i) * d,
                    node->parents[i]->values.data(), static_cast<std::size_t>(d) * sizeof(double));
    }
    if (node->requires_grad) {
        node->backward_fn = [d](TensorNode& self) {
            for (std::size_t i = 0; i < self.parents.size(); ++i) {
                auto& p = self.parents[i];
                if (!p->requires_grad) continue;
                p->ensure_grad();
                K().axpy(1.0, self.grad.data() + static_cast<std::int64_t>(i) * d, p->grad.data(),
                         static_cast<std::size_t>(d));
            }
        };
    }
    return Tensor(node);
}

// ---- reductions & nonlinearities ----------------------------------------

Tensor sum(const Tensor& a) {
    auto pa = a.node_ptr();
    auto node = make_op_node(Shape{}, {pa}, "sum");
    node->values[0] = K().sum(pa->values.data(), pa->values.size());
    if (node->requires_grad) {
        node->backward_fn = [](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            K().add_vs(p->grad.data(), self.grad[0], p->grad.data(), p->grad.size());
        };
    }
    return Tensor(node);
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_axis(const Tensor& a, int axis, bool keepdim) {
    auto pa = a.node_ptr();
    const int rank = static_cast<int>(pa->shape.size());
    if (axis < 0 || axis >= rank) throw DimensionError("sum_axis axis out of range for " +
                                                       shape_str(pa->shape));
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= pa->shape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= pa->shape[d];
    const std::int64_t len = pa->shape[axis];

    Shape oshape;
    for (int d = 0; d < rank; ++d) {
        if (d == axis) {
            if (keepdim) oshape.push_back(1);
        } else {
            oshape.push_back(pa->shape[d]);
        }
    }
    if (oshape.empty()) oshape = Shape{};
    auto node = make_op_node(oshape, {pa}, "sum_axis");
    double* out = node->values.data();
    const double* src = pa->values.data();
    if (inner == 1) {
        for (std::int64_t o = 0; o < outer; ++o)
            out[o] = K().sum(src + o * len, static_cast<std::size_t>(len));
    } else {
        std::fill(node->values.begin(), node->values.end(), 0.0);
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t l = 0; l < len; ++l) {
                K().axpy(1.0, src + (o * len + l) * inner, out + o * inner,
                         static_cast<std::size_t>(inner));
            }
        }
    }
    if (node->requires_grad) {
        node->backward_fn = [outer, inner, len](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            const double* g = self.grad.data();
            double* gin = p->grad.data();
            if (inner == 1) {
                for (std::int64_t o = 0; o < outer; ++o)
                    K().add_vs(gin + o * len, g[o], gin + o * len, static_cast<std::size_t>(len));
            } else {
                for (std::int64_t o = 0; o < outer; ++o) {
                    for (std::int64_t l = 0; l < len; ++l) {
                        K().axpy(1.0, g + o * inner, gin + (o * len + l) * inner,
                                 static_cast<std::size_t>(inner));
                    }
                }
            }
        };
    }
    return Tensor(node);
}

namespace {

Tensor softmax_last(const Tensor& a) {
    auto pa = a.node_ptr();
    const std::int64_t d = pa->shape.back();
    const std::int64_t rows = shape_numel(pa->shape) / d;
    auto node = make_op_node(pa->shape, {pa}, "softmax");
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* x = pa->values.data() + r * d;
        double* y = node->values.data() + r * d;
        const double m = K().vmax(x, static_cast<std::size_t>(d));
        double s = 0.0;
        for (std::int64_t i = 0; i < d; ++i) {
            y[i] = std::exp(x[i] - m);
            s += y[i];
        }
        if (!(s > 0.0) || !std::isfinite(s)) throw NumericError("non-finite row in softmax");
        K().mul_vs(y, 1.0 / s, y, static_cast<std::size_t>(d));
    }
    if (node->requires_grad) {
        node->backward_fn = [d, rows](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            std::vector<double> tmp(static_cast<std::size_t>(d));
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* y = self.values.data() + r * d;
                const double* g = self.grad.data() + r * d;
                double* gx = p->grad.data() + r * d;
                const double dotv = K().dot(g, y, static_cast<std::size_t>(d));
                K().sub_vs(g, dotv, tmp.data(), static_cast<std::size_t>(d));
                K().fmadd(y, tmp.data(), gx, static_cast<std::size_t>(d));
            }
        };
    }
    return Tensor(node);
}

Tensor l2_normalize_last(const Tensor& a) {
    auto pa = a.node_ptr();
    const std::int64_t d = pa->shape.back();
    const std::int64_t rows = shape_numel(pa->shape) / d;
    auto node = make_op_node(pa->shape, {pa}, "l2_normalize");
    std::vector<double> norms(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* x = pa->values.data() + r * d;
        double* y = node->values.data() + r * d;
        const double n2 = K().dot(x, x, static_cast<std::size_t>(d));
        const double n = std::sqrt(n2);
        norms[static_cast<std::size_t>(r)] = n;
        if (n < 1e-150) {
            // zero slices pass through unchanged
            std::memcpy(y, x, static_cast<std::size_t>(d) * sizeof(double));
        } else {
            K().mul_vs(x, 1.0 / n, y, static_cast<std::size_t>(d));
        }
    }
    check_finite(*node, "l2_normalize");
    if (node->requires_grad) {
        node->backward_fn = [d, rows, norms = std::move(norms)](TensorNode& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double n = norms[static_cast<std::size_t>(r)];
                const double* y = self.values.data() + r * d;
                const double* g = self.grad.data() + r * d;
                double* gx = p->grad.data() + r * d;
                if (n < 1e-150) {
                    K().axpy(1.0, g, gx, static_cast<std::size_t>(d));
                    continue;
                }
                const double gy = K().dot(g, y, static_cast<std::size_t>(d));
                for (std::int64_t i = 0; i < d; ++i) gx[i] += (g[i] - y[i] * gy) / n;
            }
        };
    }
    return Tensor(node);
}

std::vector<int> move_axis_last(int rank, int axis) {
    std::vector<int> perm;
    perm.reserve(rank);
    for (int d = 0; d < rank; ++d) {
        if (d != axis) perm.push_back(d);
    }
    perm.push_back(axis);
    return perm;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
    const int rank = a.ndim();
    if (axis < 0 || axis >= rank) throw DimensionError("softmax axis out of range for " +
                                                       shape_str(a.shape()));
    if (axis == rank - 1) return softmax_last(a);
    const auto perm = move_axis_last(rank, axis);
    return permute(softmax_last(permute(a, perm)), inverse_perm(perm));
}

Tensor log_softmax(const Tensor& a, int axis) {
    const int rank = a.ndim();
    if (axis < 0 || axis >= rank) throw DimensionError("log_softmax axis out of range for " +
                                                       shape_str(a.shape()));
    // max is a constant shift, so the gradient is exact.
    const auto work = [](const Tensor& x) {
        auto px = x.node_ptr();
        const std::int64_t d = px->shape.back();
        const std::int64_t rows = shape_numel(px->shape) / d;
        Shape mshape = px->shape;
        mshape.back() = 1;
        std::vector<double> maxes(static_cast<std::size_t>(rows));
        for (std::int64_t r = 0; r < rows; ++r)
            maxes[static_cast<std::size_t>(r)] = K().vmax(px->values.data() + r * d,
                                                          static_cast<std::size_t>(d));
        const Tensor shift = Tensor::from_data(mshape, std::move(maxes));
        const Tensor z = sub(x, shift);
        const Tensor lse = log(sum_axis(exp(z), x.ndim() - 1, true));
        return sub(z, lse);
    };
    if (axis == rank - 1) return work(a);
    const auto perm = move_axis_last(rank, axis);
    return permute(work(permute(a, perm)), inverse_perm(perm));
}

Tensor l2_normalize(const Tensor& a, int axis) {
    const int rank = a.ndim();
    if (axis < 0 || axis >= rank) throw DimensionError("l2_normalize axis out of range for " +
                                                       shape_str(a.shape()));
    if (axis == rank - 1) return l2_normalize_last(a);
    const auto perm = move_axis_last(rank, axis);
    return permute(l2_normalize_last(permute(a, perm)), inverse_perm(perm));
}

// ---- backward ----------------------------------------------------------

void backward(const Tensor& root) {
    auto r = root.node_ptr();
    if (!r) throw ContractError("backward on an undefined tensor");
    if (shape_numel(r->shape) != 1) {
        throw ContractError("backward root must be a scalar, got shape " + shape_str(r->shape));
    }
    if (!r->requires_grad) return;

    // Post-order over the requires-grad subgraph, then reversed: consumers
    // are processed before producers.
    std::vector<TensorNode*> topo;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(r.get(), 0);
    visited.insert(r.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorNode* node : topo) {
        node->ensure_grad();
        if (!node->is_leaf) std::fill(node->grad.begin(), node->grad.end(), 0.0);
    }
    r->grad[0] += 1.0;

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorNode* node = *it;
        if (!node->is_leaf && node->backward_fn) node->backward_fn(*node);
    }
}

}  // namespace contsep
