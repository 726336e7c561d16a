#include "odmn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace odmn {

namespace {
void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}
}  // namespace

int Tape::matmul(int a, int b) {
    const Tensor2& A = v(a);
    const Tensor2& B = v(b);
    Tensor2 out = matmul_plain(A, B);
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& A = t.v(a);
        const Tensor2& B = t.v(b);
        Tensor2& GA = t.g(a);
        Tensor2& GB = t.g(b);
        // GA += G * B^T
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < B.cols(); ++j) {
                const double gij = G.at(i, j);
                if (gij == 0.0) continue;
                for (int k = 0; k < A.cols(); ++k) GA.at(i, k) += gij * B.at(k, j);
            }
        // GB += A^T * G
        for (int i = 0; i < A.rows(); ++i)
            for (int k = 0; k < A.cols(); ++k) {
                const double aik = A.at(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < B.cols(); ++j) GB.at(k, j) += aik * G.at(i, j);
            }
    });
}

int Tape::add(int a, int b) {
    const Tensor2& A = v(a);
    const Tensor2& B = v(b);
    require_same_shape(A, B, "add");
    Tensor2 out = A;
    for (size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        Tensor2& GB = t.g(b);
        for (size_t i = 0; i < G.size(); ++i) {
            GA[i] += G[i];
            GB[i] += G[i];
        }
    });
}

int Tape::sub(int a, int b) {
    const Tensor2& A = v(a);
    const Tensor2& B = v(b);
    require_same_shape(A, B, "sub");
    Tensor2 out = A;
    for (size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        Tensor2& GB = t.g(b);
        for (size_t i = 0; i < G.size(); ++i) {
            GA[i] += G[i];
            GB[i] -= G[i];
        }
    });
}

int Tape::mul(int a, int b) {
    const Tensor2& A = v(a);
    const Tensor2& B = v(b);
    require_same_shape(A, B, "mul");
    Tensor2 out = A;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& A = t.v(a);
        const Tensor2& B = t.v(b);
        Tensor2& GA = t.g(a);
        Tensor2& GB = t.g(b);
        for (size_t i = 0; i < G.size(); ++i) {
            GA[i] += G[i] * B[i];
            GB[i] += G[i] * A[i];
        }
    });
}

int Tape::add_rowvec(int a, int r) {
    const Tensor2& A = v(a);
    const Tensor2& R = v(r);
    if (R.rows() != 1 || R.cols() != A.cols())
        throw ShapeError("add_rowvec: want 1x" + std::to_string(A.cols()) + ", got " + shape_str(R));
    Tensor2 out = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) += R.at(0, j);
    return push(std::move(out), [a, r](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        Tensor2& GR = t.g(r);
        for (int i = 0; i < G.rows(); ++i)
            for (int j = 0; j < G.cols(); ++j) {
                GA.at(i, j) += G.at(i, j);
                GR.at(0, j) += G.at(i, j);
            }
    });
}

int Tape::mul_colvec(int a, int c) {
    const Tensor2& A = v(a);
    const Tensor2& C = v(c);
    if (C.cols() != 1 || C.rows() != A.rows())
        throw ShapeError("mul_colvec: want " + std::to_string(A.rows()) + "x1, got " + shape_str(C));
    Tensor2 out = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) *= C.at(i, 0);
    return push(std::move(out), [a, c](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& A = t.v(a);
        const Tensor2& C = t.v(c);
        Tensor2& GA = t.g(a);
        Tensor2& GC = t.g(c);
        for (int i = 0; i < G.rows(); ++i) {
            double acc = 0.0;
            for (int j = 0; j < G.cols(); ++j) {
                GA.at(i, j) += G.at(i, j) * C.at(i, 0);
                acc += G.at(i, j) * A.at(i, j);
            }
            GC.at(i, 0) += acc;
        }
    });
}

int Tape::mul_rowvec_const(int a, const Tensor2& r) {
    const Tensor2& A = v(a);
    if (r.rows() != 1 || r.cols() != A.cols())
        throw ShapeError("mul_rowvec_const: want 1x" + std::to_string(A.cols()) + ", got " + shape_str(r));
    Tensor2 out = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) *= r.at(0, j);
    Tensor2 rc = r;
    return push(std::move(out), [a, rc](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        for (int i = 0; i < G.rows(); ++i)
            for (int j = 0; j < G.cols(); ++j) GA.at(i, j) += G.at(i, j) * rc.at(0, j);
    });
}

int Tape::add_rowvec_const(int a, const Tensor2& r) {
    const Tensor2& A = v(a);
    if (r.rows() != 1 || r.cols() != A.cols())
        throw ShapeError("add_rowvec_const: want 1x" + std::to_string(A.cols()) + ", got " + shape_str(r));
    Tensor2 out = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) += r.at(0, j);
    return push(std::move(out), [a](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
    });
}

int Tape::take_col(int a, int j) {
    const Tensor2& A = v(a);
    if (j < 0 || j >= A.cols())
        throw ShapeError("take_col: column " + std::to_string(j) + " out of range for " + shape_str(A));
    Tensor2 out(A.rows(), 1);
    for (int i = 0; i < A.rows(); ++i) out.at(i, 0) = A.at(i, j);
    return push(std::move(out), [a, j](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        for (int i = 0; i < G.rows(); ++i) GA.at(i, j) += G.at(i, 0);
    });
}

int Tape::concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const int rows = v(parts[0]).rows();
    int cols = 0;
    for (int p : parts) {
        if (v(p).rows() != rows) throw ShapeError("concat_cols: row count mismatch");
        cols += v(p).cols();
    }
    Tensor2 out(rows, cols);
    int off = 0;
    for (int p : parts) {
        const Tensor2& P = v(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < P.cols(); ++j) out.at(i, off + j) = P.at(i, j);
        off += P.cols();
    }
    return push(std::move(out), [parts](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        int off = 0;
        for (int p : parts) {
            Tensor2& GP = t.g(p);
            for (int i = 0; i < GP.rows(); ++i)
                for (int j = 0; j < GP.cols(); ++j) GP.at(i, j) += G.at(i, off + j);
            off += GP.cols();
        }
    });
}

int Tape::gather_rows(int table, const std::vector<int>& ids, const std::string& slot_name) {
    const Tensor2& T = v(table);
    Tensor2 out(static_cast<int>(ids.size()), T.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || id >= T.rows())
            throw ShapeError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(T.rows()) + ") for slot '" + slot_name + "'");
        for (int j = 0; j < T.cols(); ++j) out.at(static_cast<int>(i), j) = T.at(id, j);
    }
    return push(std::move(out), [table, ids](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GT = t.g(table);
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < G.cols(); ++j) GT.at(ids[i], j) += G.at(static_cast<int>(i), j);
    });
}

int Tape::relu(int a) {
    Tensor2 out = v(a);
    for (size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return push(std::move(out), [a](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& A = t.v(a);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < G.size(); ++i)
            if (A[i] > 0.0) GA[i] += G[i];
    });
}

int Tape::sigmoid(int a) {
    Tensor2 out = v(a);
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    return push(std::move(out), [a](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& Y = t.v(self);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * Y[i] * (1.0 - Y[i]);
    });
}

int Tape::softmax_rows(int a) {
    const Tensor2& A = v(a);
    Tensor2 out(A.rows(), A.cols());
    for (int i = 0; i < A.rows(); ++i) {
        double mx = A.at(i, 0);
        for (int j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < A.cols(); ++j) {
            out.at(i, j) = std::exp(A.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) /= sum;
    }
    return push(std::move(out), [a](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& Y = t.v(self);
        Tensor2& GA = t.g(a);
        for (int i = 0; i < G.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < G.cols(); ++j) dot += G.at(i, j) * Y.at(i, j);
            for (int j = 0; j < G.cols(); ++j) GA.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
        }
    });
}

int Tape::log_floored(int a, double floor) {
    const Tensor2& A = v(a);
    Tensor2 out = A;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i] > floor ? out[i] : floor);
    return push(std::move(out), [a, floor](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        const Tensor2& A = t.v(a);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < G.size(); ++i)
            if (A[i] > floor) GA[i] += G[i] / A[i];
    });
}

int Tape::one_minus(int a) {
    Tensor2 out = v(a);
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - out[i];
    return push(std::move(out), [a](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < G.size(); ++i) GA[i] -= G[i];
    });
}

int Tape::scale(int a, double k) {
    Tensor2 out = v(a);
    for (size_t i = 0; i < out.size(); ++i) out[i] *= k;
    return push(std::move(out), [a, k](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < G.size(); ++i) GA[i] += k * G[i];
    });
}

int Tape::rowsum(int a) {
    const Tensor2& A = v(a);
    Tensor2 out(A.rows(), 1);
    for (int i = 0; i < A.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < A.cols(); ++j) s += A.at(i, j);
        out.at(i, 0) = s;
    }
    return push(std::move(out), [a](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        Tensor2& GA = t.g(a);
        for (int i = 0; i < GA.rows(); ++i)
            for (int j = 0; j < GA.cols(); ++j) GA.at(i, j) += G.at(i, 0);
    });
}

int Tape::masked_mean(int a, const Tensor2& mask) {
    const Tensor2& A = v(a);
    require_same_shape(A, mask, "masked_mean");
    double denom = 0.0;
    for (size_t i = 0; i < mask.size(); ++i) denom += mask[i];
    Tensor2 out(1, 1);
    if (denom > 0.0) {
        double s = 0.0;
        for (size_t i = 0; i < A.size(); ++i) s += A[i] * mask[i];
        out.at(0, 0) = s / denom;
    }
    Tensor2 mc = mask;
    return push(std::move(out), [a, mc, denom](Tape& t, int self) {
        if (denom <= 0.0) return;
        const double g0 = t.g(self).at(0, 0);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < GA.size(); ++i) GA[i] += g0 * mc[i] / denom;
    });
}

int Tape::mean_all(int a) {
    const Tensor2& A = v(a);
    if (A.size() == 0) throw ShapeError("mean_all: empty tensor");
    double s = 0.0;
    for (size_t i = 0; i < A.size(); ++i) s += A[i];
    const double n = static_cast<double>(A.size());
    Tensor2 out(1, 1);
    out.at(0, 0) = s / n;
    return push(std::move(out), [a, n](Tape& t, int self) {
        const double g0 = t.g(self).at(0, 0);
        Tensor2& GA = t.g(a);
        for (size_t i = 0; i < GA.size(); ++i) GA[i] += g0 / n;
    });
}

int Tape::add_many(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("add_many: no parts");
    Tensor2 out = v(parts[0]);
    for (size_t p = 1; p < parts.size(); ++p) {
        const Tensor2& P = v(parts[p]);
        require_same_shape(out, P, "add_many");
        for (size_t i = 0; i < out.size(); ++i) out[i] += P[i];
    }
    return push(std::move(out), [parts](Tape& t, int self) {
        const Tensor2& G = t.g(self);
        for (int p : parts) {
            Tensor2& GP = t.g(p);
            for (size_t i = 0; i < G.size(); ++i) GP[i] += G[i];
        }
    });
}

void Tape::backward(int loss) {
    if (nodes_.empty()) throw StateError("Tape::backward: nothing recorded");
    const Tensor2& L = v(loss);
    if (L.rows() != 1 || L.cols() != 1)
        throw ShapeError("Tape::backward: loss must be 1x1, got " + shape_str(L));
    for (Node& n : nodes_) {
        n.grad = Tensor2(n.val.rows(), n.val.cols());
    }
    nodes_[loss].grad.at(0, 0) = 1.0;
    ran_backward_ = true;
    for (int id = loss; id >= 0; --id) {
        if (nodes_[id].back) nodes_[id].back(*this, id);
    }
}

}  // namespace odmn
