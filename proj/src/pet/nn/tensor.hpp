#pragma once

// Dense row-major double tensors and a tape-based reverse-mode autodiff.
//
// A Tape records every primitive applied during a forward pass. Values are
// addressed through lightweight Var handles. Parameters live outside the
// tape; Tape::backward accumulates into Parameter::grad.
//
// Matrix products go through Eigen maps (see kernel_matmul in tensor.cpp);
// that is the single place to swap in another GEMM backend.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pet::nn {

using Shape = std::vector<std::size_t>;

[[nodiscard]] std::string shape_string(const Shape& s);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    /// 2-D tensor from nested rows.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor vector(std::initializer_list<double> values);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    /// Last extent.
    [[nodiscard]] std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
    /// Product of all but the last extent.
    [[nodiscard]] std::size_t rows() const noexcept {
        return shape_.empty() || cols() == 0 ? 0 : data_.size() / cols();
    }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    /// Row-major 2-D access over (rows(), cols()).
    double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    void fill(double v) noexcept;
    [[nodiscard]] bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// A learnable tensor and its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v);
    void zero_grad() noexcept { grad.fill(0.0); }
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Shape& shape() const { return value().shape(); }
};

/// Row-wise keep mask for softmax. Empty means "keep everything"; a mask of
/// `cols` entries applies to every row; `rows * cols` entries is per element.
struct Mask {
    std::vector<std::uint8_t> keep;
    std::size_t cols = 0;

    [[nodiscard]] bool empty() const noexcept { return keep.empty(); }
    [[nodiscard]] bool kept(std::size_t r, std::size_t c) const noexcept {
        return keep.size() == cols ? keep[c] != 0 : keep[r * cols + c] != 0;
    }
    /// Lower-triangular n x n mask: row i keeps columns <= i.
    static Mask causal(std::size_t n);
    /// Keeps the first `kept` of `cols` columns in every row.
    static Mask leading_columns(std::size_t cols, std::size_t kept);
};

class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    /// With gradients disabled no backward closures are recorded.
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    [[nodiscard]] bool grad_enabled() const noexcept { return grad_enabled_; }

    Var constant(Tensor value);
    Var parameter(Parameter& p);

    /// Records a new node. `backward` runs during Tape::backward only when
    /// the node needs a gradient; it reads grad(self) and adds into the
    /// gradients of its inputs with accumulate_grad.
    Var push(Tensor value, std::initializer_list<Var> inputs, Backward backward);
    Var push(Tensor value, std::span<const Var> inputs, Backward backward);

    [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    [[nodiscard]] const Tensor& grad(std::size_t id) const { return nodes_.at(id).grad; }
    [[nodiscard]] bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
    void accumulate_grad(std::size_t id, std::span<const double> g);
    /// Mutable gradient buffer of a node, allocated on first use.
    std::span<double> grad_buffer(std::size_t id);

    /// Reverse pass from a scalar node. Allowed once per tape.
    void backward(Var scalar);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t degenerate_rows() const noexcept { return degenerate_rows_; }
    void note_degenerate_row() noexcept { ++degenerate_rows_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        Parameter* param = nullptr;
        Backward backward;
    };
    std::vector<Node> nodes_;
    bool grad_enabled_;
    bool consumed_ = false;
    std::size_t degenerate_rows_ = 0;
};

// ---- primitives -------------------------------------------------------------

/// [.., i, k] x [k, j] or [.., i, k] x [.., k, j] (equal leading extents).
Var matmul(Var a, Var b);
/// Transpose of a 2-D tensor.
Var transpose(Var a);
Var add(Var a, Var b);
/// x[.., D] + bias[D] broadcast over rows.
Var add_bias(Var x, Var bias);
Var scale(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
/// Per-row standardization (eps = 1e-5) followed by gain * x + bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Row softmax; masked entries get probability 0. Fully masked rows become
/// zeros and are counted via Tape::degenerate_rows().
Var softmax(Var x, const Mask& mask = {});
/// Columns [start, start + count) of a 2-D tensor.
Var slice_cols(Var a, std::size_t start, std::size_t count);
/// Rows [start, start + count) of a 2-D tensor.
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
/// Sum of all entries, as a 1-element tensor.
Var sum(Var a);
/// Mean of (pred - target)^2 over the entries whose column < `used_cols`.
Var masked_mse(Var pred, const Tensor& target, std::size_t used_cols);

}  // namespace pet::nn
