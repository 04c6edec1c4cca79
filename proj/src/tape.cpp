#include "camel/tape.hpp"

#include <algorithm>
#include <cmath>

namespace camel {

void Tape::check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw std::logic_error("tape: use of an invalid node handle");
}

Tape::Node& Tape::node(Var v) {
    check(v);
    return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
    check(v);
    return nodes_[v.id];
}

Var Tape::push(Matrix val, std::function<void(Tape&)> back) {
    Node n;
    n.val = std::move(val);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_back(Var v, std::function<void(Tape&)> back) {
    if (grad_enabled_) node(v).back = std::move(back);
}

Var Tape::leaf(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
    auto it = param_index_.find(&p);
    if (it != param_index_.end()) return Var{it->second};
    Var v = push(Matrix(), nullptr);
    nodes_[v.id].ext = &p.value;
    nodes_[v.id].bound = &p;
    param_nodes_.emplace_back(&p, v.id);
    param_index_.emplace(&p, v.id);
    return v;
}

const Matrix& Tape::value(Var v) const { return node(v).value(); }

Matrix& Tape::grad_of(Var v) {
    Node& n = node(v);
    const Matrix& val = n.value();
    if (!n.grad.same_shape(val)) n.grad = Matrix(val.rows, val.cols);
    return n.grad;
}

Var Tape::matmul(Var a, Var b) {
    Matrix out;
    matmul_into(value(a), value(b), out);
    Var y = push(std::move(out), nullptr);
    set_back(y, [a, b, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        add_matmul_bt(g, t.value(b), t.grad_of(a));
        add_matmul_at(t.value(a), g, t.grad_of(b));
    });
    return y;
}

Var Tape::add(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (!av.same_shape(bv))
        throw std::invalid_argument("add shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
    Matrix out = av;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
    Var y = push(std::move(out), nullptr);
    set_back(y, [a, b, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        Matrix& ga = t.grad_of(a);
        Matrix& gb = t.grad_of(b);
        for (size_t i = 0; i < g.size(); ++i) {
            ga.data[i] += g.data[i];
            gb.data[i] += g.data[i];
        }
    });
    return y;
}

Var Tape::add_row_broadcast(Var x, Var bias) {
    const Matrix& xv = value(x);
    const Matrix& bv = value(bias);
    if (bv.rows != 1 || bv.cols != xv.cols)
        throw std::invalid_argument("bias must be 1x" + std::to_string(xv.cols) + ", got " + bv.shape_str());
    Matrix out = xv;
    for (int r = 0; r < out.rows; ++r) {
        double* orow = out.row(r);
        for (int c = 0; c < out.cols; ++c) orow[c] += bv.data[c];
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, bias, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        Matrix& gx = t.grad_of(x);
        Matrix& gb = t.grad_of(bias);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
        for (int r = 0; r < g.rows; ++r) {
            const double* grow = g.row(r);
            for (int c = 0; c < g.cols; ++c) gb.data[c] += grow[c];
        }
    });
    return y;
}

Var Tape::mul_colvec(Var x, Var col) {
    const Matrix& xv = value(x);
    const Matrix& cv = value(col);
    if (cv.cols != 1 || cv.rows != xv.rows)
        throw std::invalid_argument("column factor must be " + std::to_string(xv.rows) + "x1, got " + cv.shape_str());
    Matrix out = xv;
    for (int r = 0; r < out.rows; ++r) {
        const double f = cv.data[r];
        double* orow = out.row(r);
        for (int c = 0; c < out.cols; ++c) orow[c] *= f;
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, col, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        const Matrix& xv2 = t.value(x);
        const Matrix& cv2 = t.value(col);
        Matrix& gx = t.grad_of(x);
        Matrix& gc = t.grad_of(col);
        for (int r = 0; r < g.rows; ++r) {
            const double f = cv2.data[r];
            const double* grow = g.row(r);
            const double* xrow = xv2.row(r);
            double* gxrow = gx.row(r);
            double acc = 0.0;
            for (int c = 0; c < g.cols; ++c) {
                gxrow[c] += grow[c] * f;
                acc += grow[c] * xrow[c];
            }
            gc.data[r] += acc;
        }
    });
    return y;
}

Var Tape::relu(Var x) {
    Matrix out = value(x);
    for (double& v : out.data) {
        if (v > 0.0)
            ++relu_positive_;
        else
            v = 0.0;
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        const Matrix& xv = t.value(x);
        Matrix& gx = t.grad_of(x);
        // subgradient at exactly 0 is 0
        for (size_t i = 0; i < g.size(); ++i)
            if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
    });
    return y;
}

Var Tape::softmax_rows(Var x) {
    const Matrix& xv = value(x);
    if (xv.cols < 1) throw std::invalid_argument("softmax over empty rows");
    Matrix out(xv.rows, xv.cols);
    for (int r = 0; r < xv.rows; ++r) {
        const double* xrow = xv.row(r);
        double* orow = out.row(r);
        double mx = xrow[0];
        for (int c = 1; c < xv.cols; ++c) mx = std::max(mx, xrow[c]);
        double sum = 0.0;
        for (int c = 0; c < xv.cols; ++c) {
            orow[c] = std::exp(xrow[c] - mx);
            sum += orow[c];
        }
        for (int c = 0; c < xv.cols; ++c) orow[c] /= sum;
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        const Matrix& yv = t.value(y);
        Matrix& gx = t.grad_of(x);
        for (int r = 0; r < g.rows; ++r) {
            const double* grow = g.row(r);
            const double* yrow = yv.row(r);
            double dot = 0.0;
            for (int c = 0; c < g.cols; ++c) dot += grow[c] * yrow[c];
            double* gxrow = gx.row(r);
            for (int c = 0; c < g.cols; ++c) gxrow[c] += yrow[c] * (grow[c] - dot);
        }
    });
    return y;
}

Var Tape::scale(Var x, double s) {
    Matrix out = value(x);
    for (double& v : out.data) v *= s;
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, y, s](Tape& t) {
        const Matrix& g = t.grad_of(y);
        Matrix& gx = t.grad_of(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += s * g.data[i];
    });
    return y;
}

Var Tape::slice_cols(Var x, int first, int count) {
    const Matrix& xv = value(x);
    if (first < 0 || count < 0 || first + count > xv.cols)
        throw std::invalid_argument("slice_cols out of range for " + xv.shape_str());
    Matrix out(xv.rows, count);
    for (int r = 0; r < xv.rows; ++r) {
        const double* xrow = xv.row(r) + first;
        double* orow = out.row(r);
        for (int c = 0; c < count; ++c) orow[c] = xrow[c];
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, y, first](Tape& t) {
        const Matrix& g = t.grad_of(y);
        Matrix& gx = t.grad_of(x);
        for (int r = 0; r < g.rows; ++r) {
            const double* grow = g.row(r);
            double* gxrow = gx.row(r) + first;
            for (int c = 0; c < g.cols; ++c) gxrow[c] += grow[c];
        }
    });
    return y;
}

Var Tape::concat_cols(std::span<const Var> xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols of nothing");
    int rows = value(xs[0]).rows;
    int total = 0;
    for (Var v : xs) {
        const Matrix& m = value(v);
        if (m.rows != rows) throw std::invalid_argument("concat_cols row mismatch");
        total += m.cols;
    }
    Matrix out(rows, total);
    int off = 0;
    for (Var v : xs) {
        const Matrix& m = value(v);
        for (int r = 0; r < rows; ++r) {
            const double* src = m.row(r);
            double* dst = out.row(r) + off;
            for (int c = 0; c < m.cols; ++c) dst[c] = src[c];
        }
        off += m.cols;
    }
    Var y = push(std::move(out), nullptr);
    std::vector<Var> parts(xs.begin(), xs.end());
    set_back(y, [parts, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        int off2 = 0;
        for (Var v : parts) {
            Matrix& gx = t.grad_of(v);
            for (int r = 0; r < g.rows; ++r) {
                const double* grow = g.row(r) + off2;
                double* gxrow = gx.row(r);
                for (int c = 0; c < gx.cols; ++c) gxrow[c] += grow[c];
            }
            off2 += gx.cols;
        }
    });
    return y;
}

Var Tape::rowwise_dot(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (!av.same_shape(bv))
        throw std::invalid_argument("rowwise_dot shape mismatch: " + av.shape_str() + " vs " + bv.shape_str());
    Matrix out(av.rows, 1);
    for (int r = 0; r < av.rows; ++r) {
        const double* arow = av.row(r);
        const double* brow = bv.row(r);
        double acc = 0.0;
        for (int c = 0; c < av.cols; ++c) acc += arow[c] * brow[c];
        out.data[r] = acc;
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [a, b, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        const Matrix& av2 = t.value(a);
        const Matrix& bv2 = t.value(b);
        Matrix& ga = t.grad_of(a);
        Matrix& gb = t.grad_of(b);
        for (int r = 0; r < av2.rows; ++r) {
            const double gr = g.data[r];
            const double* arow = av2.row(r);
            const double* brow = bv2.row(r);
            double* garow = ga.row(r);
            double* gbrow = gb.row(r);
            for (int c = 0; c < av2.cols; ++c) {
                garow[c] += gr * brow[c];
                gbrow[c] += gr * arow[c];
            }
        }
    });
    return y;
}

Var Tape::cross_entropy_mean(Var logits, const std::vector<int>& labels,
                             const std::string& context) {
    const Matrix& lv = value(logits);
    const int batch = lv.rows;
    const int classes = lv.cols;
    if (batch == 0) throw std::runtime_error("cross entropy over an empty batch" +
                                             (context.empty() ? "" : " (" + context + ")"));
    if (static_cast<int>(labels.size()) != batch)
        throw std::runtime_error("label count " + std::to_string(labels.size()) +
                                 " does not match batch " + std::to_string(batch));
    for (int r = 0; r < batch; ++r) {
        if (labels[r] < 0 || labels[r] >= classes)
            throw std::runtime_error((context.empty() ? std::string("batch") : context) +
                                     ", row " + std::to_string(r) + ": label " +
                                     std::to_string(labels[r]) + " outside [0, " +
                                     std::to_string(classes) + ")");
    }
    double total = 0.0;
    for (int r = 0; r < batch; ++r) {
        const double* row = lv.row(r);
        double mx = row[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) sum += std::exp(row[c] - mx);
        total += mx + std::log(sum) - row[labels[r]];
    }
    Matrix out(1, 1);
    out.data[0] = total / batch;
    Var y = push(std::move(out), nullptr);
    set_back(y, [logits, y, labels](Tape& t) {
        const double g = t.grad_of(y).data[0];
        const Matrix& lv2 = t.value(logits);
        Matrix& gl = t.grad_of(logits);
        const double inv_batch = 1.0 / lv2.rows;
        for (int r = 0; r < lv2.rows; ++r) {
            const double* row = lv2.row(r);
            double* grow = gl.row(r);
            double mx = row[0];
            for (int c = 1; c < lv2.cols; ++c) mx = std::max(mx, row[c]);
            double sum = 0.0;
            for (int c = 0; c < lv2.cols; ++c) sum += std::exp(row[c] - mx);
            for (int c = 0; c < lv2.cols; ++c) {
                double p = std::exp(row[c] - mx) / sum;
                grow[c] += g * inv_batch * (p - (c == labels[r] ? 1.0 : 0.0));
            }
        }
    });
    return y;
}

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw std::logic_error("backward called on a value-only tape");
    if (nodes_.empty()) throw std::logic_error("backward called on an empty tape");
    check(loss);
    const Matrix& lv = nodes_[loss.id].value();
    if (lv.rows != 1 || lv.cols != 1)
        throw std::logic_error("backward requires a scalar loss, got " + lv.shape_str());
    for (Node& n : nodes_) {
        const Matrix& val = n.value();
        if (n.grad.same_shape(val))
            n.grad.zero();
        else
            n.grad = Matrix(val.rows, val.cols);
    }
    nodes_[loss.id].grad.data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back(*this);
    for (const auto& [p, id] : param_nodes_) {
        if (p->frozen) continue;
        const Matrix& g = nodes_[id].grad;
        for (size_t i = 0; i < g.size(); ++i) p->grad.data[i] += g.data[i];
    }
}

void Tape::reset() {
    nodes_.clear();
    param_nodes_.clear();
    param_index_.clear();
    relu_positive_ = 0;
}

Var Tape::linear_op(Var x, Var w, Var b) {
    const Matrix& bv = value(b);
    Matrix out;
    matmul_into(value(x), value(w), out);
    if (bv.rows != 1 || bv.cols != out.cols)
        throw std::invalid_argument("bias must be 1x" + std::to_string(out.cols) + ", got " +
                                    bv.shape_str());
    for (int r = 0; r < out.rows; ++r) {
        double* orow = out.row(r);
        for (int c = 0; c < out.cols; ++c) orow[c] += bv.data[c];
    }
    Var y = push(std::move(out), nullptr);
    set_back(y, [x, w, b, y](Tape& t) {
        const Matrix& g = t.grad_of(y);
        add_matmul_bt(g, t.value(w), t.grad_of(x));
        add_matmul_at(t.value(x), g, t.grad_of(w));
        Matrix& gb = t.grad_of(b);
        for (int r = 0; r < g.rows; ++r) {
            const double* grow = g.row(r);
            for (int c = 0; c < g.cols; ++c) gb.data[c] += grow[c];
        }
    });
    return y;
}

Var linear(Tape& t, Var x, Parameter& w, Parameter& b) {
    return t.linear_op(x, t.param(w), t.param(b));
}

}  // namespace camel
