#include "pet/nn/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pet/error.hpp"

namespace pet::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::size_t product(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// out (+)= op(a) * op(b) for row-major blocks.
void kernel_matmul(const double* a, std::size_t ar, std::size_t ac, bool ta, const double* b,
                   std::size_t br, std::size_t bc, bool tb, double* out, bool accumulate) {
    ConstMap A(a, static_cast<Eigen::Index>(ar), static_cast<Eigen::Index>(ac));
    ConstMap B(b, static_cast<Eigen::Index>(br), static_cast<Eigen::Index>(bc));
    const std::size_t rows = ta ? ac : ar;
    const std::size_t cols = tb ? br : bc;
    MutMap C(out, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!accumulate) C.setZero();
    if (!ta && !tb) C.noalias() += A * B;
    else if (ta && !tb) C.noalias() += A.transpose() * B;
    else if (!ta && tb) C.noalias() += A * B.transpose();
    else C.noalias() += A.transpose() * B.transpose();
}

void require_2d(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + " expects a 2-D tensor, got " + shape_string(t.shape()));
    }
}

}  // namespace

std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != product(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_string(shape_));
    }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix initializer");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}

const Tensor& Var::value() const { return tape->value(id); }

Mask Mask::causal(std::size_t n) {
    Mask m;
    m.cols = n;
    m.keep.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m.keep[i * n + j] = 1;
    return m;
}

Mask Mask::leading_columns(std::size_t cols, std::size_t kept) {
    Mask m;
    m.cols = cols;
    m.keep.assign(cols, 0);
    for (std::size_t j = 0; j < std::min(cols, kept); ++j) m.keep[j] = 1;
    return m;
}

// ---- tape --------------------------------------------------------------------

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.value = p.value;
    n.needs_grad = grad_enabled_;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) {
        for (const Var& v : inputs) {
            if (v.tape != this) throw ContractViolation("operands recorded on different tapes");
            n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
        }
        if (n.needs_grad) n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

std::span<double> Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad.data();
}

void Tape::accumulate_grad(std::size_t id, std::span<const double> g) {
    if (!nodes_.at(id).needs_grad) return;
    auto buf = grad_buffer(id);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var scalar) {
    if (consumed_) throw ContractViolation("tape already consumed by a backward pass");
    if (!grad_enabled_) throw ContractViolation("backward on a tape without gradients");
    if (scalar.tape != this) throw ContractViolation("loss recorded on a different tape");
    if (value(scalar.id).size() != 1) throw ShapeError("backward needs a scalar loss");
    consumed_ = true;
    grad_buffer(scalar.id)[0] = 1.0;
    for (std::size_t i = scalar.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        if (n.backward) {
            auto fn = std::move(n.backward);
            fn(*this, i);
        }
        if (nodes_[i].param) {
            auto& pg = nodes_[i].param->grad;
            if (pg.size() != nodes_[i].grad.size()) pg = Tensor(nodes_[i].value.shape(), 0.0);
            for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += nodes_[i].grad[k];
        }
    }
}

// ---- primitives --------------------------------------------------------------

Var matmul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() < 2 || B.rank() < 2) {
        throw ShapeError("matmul needs rank >= 2 operands, got " + shape_string(A.shape()) +
                         " and " + shape_string(B.shape()));
    }
    const std::size_t i = A.shape()[A.rank() - 2];
    const std::size_t k = A.shape().back();
    const std::size_t kb = B.shape()[B.rank() - 2];
    const std::size_t j = B.shape().back();
    const bool broadcast_b = B.rank() == 2;
    const Shape batch(A.shape().begin(), A.shape().end() - 2);
    const Shape batch_b(B.shape().begin(), B.shape().end() - 2);
    if (k != kb || (!broadcast_b && batch != batch_b)) {
        throw ShapeError("matmul shape mismatch: " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()));
    }
    const std::size_t nb = product(batch);
    Shape out_shape = batch;
    out_shape.push_back(i);
    out_shape.push_back(j);
    Tensor C(out_shape, 0.0);
    for (std::size_t t = 0; t < nb; ++t) {
        const double* bp = B.data().data() + (broadcast_b ? 0 : t * k * j);
        kernel_matmul(A.data().data() + t * i * k, i, k, false, bp, k, j, false,
                      C.data().data() + t * i * j, false);
    }
    return a.tape->push(std::move(C), {a, b}, [a, b, i, k, j, nb, broadcast_b](Tape& tape, std::size_t self) {
        const double* g = tape.grad(self).data().data();
        const double* av = tape.value(a.id).data().data();
        const double* bv = tape.value(b.id).data().data();
        if (tape.needs_grad(a.id)) {
            auto ga = tape.grad_buffer(a.id);
            for (std::size_t t = 0; t < nb; ++t) {
                kernel_matmul(g + t * i * j, i, j, false, bv + (broadcast_b ? 0 : t * k * j), k, j,
                              true, ga.data() + t * i * k, true);
            }
        }
        if (tape.needs_grad(b.id)) {
            auto gb = tape.grad_buffer(b.id);
            for (std::size_t t = 0; t < nb; ++t) {
                kernel_matmul(av + t * i * k, i, k, true, g + t * i * j, i, j, false,
                              gb.data() + (broadcast_b ? 0 : t * k * j), true);
            }
        }
    });
}

Var transpose(Var a) {
    const Tensor& A = a.value();
    require_2d(A, "transpose");
    const std::size_t r = A.extent(0);
    const std::size_t c = A.extent(1);
    Tensor out({c, r});
    for (std::size_t x = 0; x < r; ++x)
        for (std::size_t y = 0; y < c; ++y) out.at(y, x) = A.at(x, y);
    return a.tape->push(std::move(out), {a}, [a, r, c](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t x = 0; x < r; ++x)
            for (std::size_t y = 0; y < c; ++y) ga[x * c + y] += g.at(y, x);
    });
}

Var add(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!A.same_shape(B)) {
        throw ShapeError("add shape mismatch: " + shape_string(A.shape()) + " + " +
                         shape_string(B.shape()));
    }
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return a.tape->push(std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
        tape.accumulate_grad(a.id, tape.grad(self).data());
        tape.accumulate_grad(b.id, tape.grad(self).data());
    });
}

Var add_bias(Var x, Var bias) {
    const Tensor& X = x.value();
    const Tensor& B = bias.value();
    if (B.rank() != 1 || B.size() != X.cols()) {
        throw ShapeError("bias " + shape_string(B.shape()) + " does not match " +
                         shape_string(X.shape()));
    }
    Tensor out = X;
    const std::size_t c = X.cols();
    for (std::size_t r = 0; r < X.rows(); ++r)
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] += B[j];
    return x.tape->push(std::move(out), {x, bias}, [x, bias, c](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        tape.accumulate_grad(x.id, g.data());
        if (tape.needs_grad(bias.id)) {
            auto gb = tape.grad_buffer(bias.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
        }
    });
}

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (auto& v : out.storage()) v *= s;
    return a.tape->push(std::move(out), {a}, [a, s](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
    });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
    return a.tape->push(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& in = tape.value(a.id);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (in[i] > 0.0) ga[i] += g[i];
    });
}

Var sigmoid(Var a) {
    Tensor out = a.value();
    for (auto& v : out.storage()) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return a.tape->push(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& y = tape.value(self);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Tensor& X = x.value();
    const Tensor& G = gain.value();
    const Tensor& B = bias.value();
    const std::size_t c = X.cols();
    if (G.size() != c || B.size() != c || G.rank() != 1 || B.rank() != 1) {
        throw ShapeError("layer_norm parameters " + shape_string(G.shape()) + "/" +
                         shape_string(B.shape()) + " do not match input " + shape_string(X.shape()));
    }
    const std::size_t rows = X.rows();
    Tensor out(X.shape());
    std::vector<double> xhat(X.size());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = X.data().data() + r * c;
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += row[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(c);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            xhat[r * c + j] = (row[j] - mean) * inv_std[r];
            out[r * c + j] = G[j] * xhat[r * c + j] + B[j];
        }
    }
    return x.tape->push(
        std::move(out), {x, gain, bias},
        [x, gain, bias, c, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
            Tape& tape, std::size_t self) {
            const Tensor& g = tape.grad(self);
            const Tensor& G = tape.value(gain.id);
            if (tape.needs_grad(gain.id) || tape.needs_grad(bias.id)) {
                std::vector<double> dg(c, 0.0);
                std::vector<double> db(c, 0.0);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < c; ++j) {
                        dg[j] += g[r * c + j] * xhat[r * c + j];
                        db[j] += g[r * c + j];
                    }
                tape.accumulate_grad(gain.id, dg);
                tape.accumulate_grad(bias.id, db);
            }
            if (!tape.needs_grad(x.id)) return;
            auto gx = tape.grad_buffer(x.id);
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_d = 0.0;
                double mean_dx = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dxhat = g[r * c + j] * G[j];
                    mean_d += dxhat;
                    mean_dx += dxhat * xhat[r * c + j];
                }
                mean_d *= inv_c;
                mean_dx *= inv_c;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dxhat = g[r * c + j] * G[j];
                    gx[r * c + j] += inv_std[r] * (dxhat - mean_d - xhat[r * c + j] * mean_dx);
                }
            }
        });
}

Var softmax(Var x, const Mask& mask) {
    const Tensor& X = x.value();
    const std::size_t c = X.cols();
    const std::size_t rows = X.rows();
    if (!mask.empty() && (mask.cols != c || (mask.keep.size() != c && mask.keep.size() != rows * c))) {
        throw ShapeError("softmax mask does not match input " + shape_string(X.shape()));
    }
    Tensor out(X.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = X.data().data() + r * c;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j)
            if (mask.empty() || mask.kept(r, j)) mx = std::max(mx, row[j]);
        if (mx == -std::numeric_limits<double>::infinity()) {
            x.tape->note_degenerate_row();
            continue;
        }
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (!mask.empty() && !mask.kept(r, j)) continue;
            const double e = std::exp(row[j] - mx);
            out[r * c + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] /= z;
    }
    return x.tape->push(std::move(out), {x}, [x, c, rows](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& p = tape.value(self);
        auto gx = tape.grad_buffer(x.id);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * p[r * c + j];
            for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += p[r * c + j] * (g[r * c + j] - dot);
        }
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    const Tensor& A = a.value();
    require_2d(A, "slice_cols");
    const std::size_t r = A.extent(0);
    const std::size_t c = A.extent(1);
    if (start + count > c) throw ShapeError("slice_cols out of range for " + shape_string(A.shape()));
    Tensor out({r, count});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) out.at(i, j) = A.at(i, start + j);
    return a.tape->push(std::move(out), {a}, [a, r, c, start, count](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) ga[i * c + start + j] += g.at(i, j);
    });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
    const Tensor& A = a.value();
    require_2d(A, "slice_rows");
    const std::size_t c = A.extent(1);
    if (start + count > A.extent(0))
        throw ShapeError("slice_rows out of range for " + shape_string(A.shape()));
    Tensor out({count, c},
               std::vector<double>(A.data().begin() + static_cast<long>(start * c),
                                   A.data().begin() + static_cast<long>((start + count) * c)));
    return a.tape->push(std::move(out), {a}, [a, c, start](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        auto ga = tape.grad_buffer(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[start * c + i] += g[i];
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols of nothing");
    Tape* tape = parts.front().tape;
    const std::size_t r = parts.front().value().extent(0);
    std::size_t total = 0;
    for (const Var& p : parts) {
        require_2d(p.value(), "concat_cols");
        if (p.value().extent(0) != r) throw ShapeError("concat_cols row mismatch");
        total += p.value().extent(1);
    }
    Tensor out({r, total});
    std::size_t off = 0;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        const std::size_t w = v.extent(1);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at(i, off + j) = v.at(i, j);
        spans.emplace_back(off, w);
        off += w;
    }
    std::vector<std::size_t> ids;
    for (const Var& p : parts) ids.push_back(p.id);
    return tape->push(std::move(out), std::span<const Var>(parts),
                      [ids, spans, r, total](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          for (std::size_t k = 0; k < ids.size(); ++k) {
                              if (!t.needs_grad(ids[k])) continue;
                              auto gp = t.grad_buffer(ids[k]);
                              const auto [off, w] = spans[k];
                              for (std::size_t i = 0; i < r; ++i)
                                  for (std::size_t j = 0; j < w; ++j)
                                      gp[i * w + j] += g[i * total + off + j];
                          }
                      });
}

Var sum(Var a) {
    const Tensor& A = a.value();
    double s = 0.0;
    for (double v : A.data()) s += v;
    return a.tape->push(Tensor({1}, std::vector<double>{s}), {a}, [a](Tape& tape, std::size_t self) {
        const double g = tape.grad(self)[0];
        auto ga = tape.grad_buffer(a.id);
        for (auto& v : ga) v += g;
    });
}

Var masked_mse(Var pred, const Tensor& target, std::size_t used_cols) {
    const Tensor& P = pred.value();
    if (!P.same_shape(target)) {
        throw ShapeError("mse shape mismatch: " + shape_string(P.shape()) + " vs " +
                         shape_string(target.shape()));
    }
    const std::size_t c = P.cols();
    const std::size_t rows = P.rows();
    if (used_cols == 0 || used_cols > c) throw ShapeError("mse column mask out of range");
    const double denom = static_cast<double>(rows * used_cols);
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < used_cols; ++j) {
            const double diff = P[r * c + j] - target[r * c + j];
            s += diff * diff;
        }
    return pred.tape->push(
        Tensor({1}, std::vector<double>{s / denom}), {pred},
        [pred, target, c, rows, used_cols, denom](Tape& tape, std::size_t self) {
            const double g = tape.grad(self)[0];
            const Tensor& P = tape.value(pred.id);
            auto gp = tape.grad_buffer(pred.id);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < used_cols; ++j)
                    gp[r * c + j] += g * 2.0 * (P[r * c + j] - target[r * c + j]) / denom;
        });
}

}  // namespace pet::nn
