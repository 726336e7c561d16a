#pragma once

#include <functional>
#include <string>
#include <vector>

#include "odmn/tensor.hpp"

namespace odmn {

/// Reverse-mode tape over Tensor2 values. Values are computed eagerly as ops
/// are recorded; backward() walks the tape in reverse creation order (parents
/// always precede children, so creation order is a topological order).
///
/// stop_gradient() cuts the graph: the stopped value is re-emitted as a leaf.
/// For finite-difference checks the stopped values can be captured once and
/// replayed on later tapes, so numeric differentiation sees the same function
/// the analytic gradient differentiates (stopped branches held constant).
class Tape {
  public:
    struct Node {
        Tensor2 val;
        Tensor2 grad;  // allocated lazily by backward()
        std::function<void(Tape&, int)> back;  // pulls this node's grad into parents
    };

    int leaf(Tensor2 v) {
        nodes_.push_back(Node{std::move(v), {}, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor2& val(int id) const { return nodes_[id].val; }
    const Tensor2& grad(int id) const {
        if (!ran_backward_) throw StateError("Tape::grad: backward() has not run on this tape");
        return nodes_[id].grad;
    }
    size_t node_count() const { return nodes_.size(); }

    // ---- graph cut ------------------------------------------------------

    /// Re-emit val(a) as a leaf; no gradient flows through. In replay mode
    /// the value recorded on a previous tape is substituted instead.
    int stop_gradient(int a) {
        const size_t k = stop_index_++;
        if (replay_) {
            if (k >= replay_stops_->size())
                throw StateError("Tape::stop_gradient: replay ran out of captured values");
            return leaf((*replay_stops_)[k]);
        }
        captured_stops_.push_back(nodes_[a].val);
        return leaf(nodes_[a].val);
    }

    const std::vector<Tensor2>& captured_stops() const { return captured_stops_; }

    /// Replay previously captured stop-gradient values on this tape.
    void begin_replay(const std::vector<Tensor2>& stops) {
        replay_ = true;
        replay_stops_ = &stops;
    }

    // ---- ops -------------------------------------------------------------

    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);

    /// Broadcast-add a 1xM row vector to every row of a.
    int add_rowvec(int a, int r);
    /// Scale column i of a by the Bx1 column vector c (row-wise broadcast).
    int mul_colvec(int a, int c);
    /// Broadcast-multiply by a constant 1xM row vector (no gradient into it).
    int mul_rowvec_const(int a, const Tensor2& r);
    /// Broadcast-add a constant 1xM row vector.
    int add_rowvec_const(int a, const Tensor2& r);

    int take_col(int a, int j);
    int concat_cols(const std::vector<int>& parts);
    /// out row i = table row ids[i]; gradient scatters back into the table.
    int gather_rows(int table, const std::vector<int>& ids, const std::string& slot_name = "");

    int relu(int a);
    int sigmoid(int a);
    int softmax_rows(int a);
    /// log(max(x, floor)); zero gradient where the floor is active.
    int log_floored(int a, double floor);
    int one_minus(int a);
    int scale(int a, double k);

    /// Row sums -> Bx1.
    int rowsum(int a);
    /// sum(a .* mask) / sum(mask); 0 when the mask is empty. mask is constant.
    int masked_mean(int a, const Tensor2& mask);
    /// Mean over all entries -> 1x1.
    int mean_all(int a);
    int add_many(const std::vector<int>& parts);

    // ---- backward --------------------------------------------------------

    /// Accumulate gradients of a 1x1 loss node into every node of the tape.
    void backward(int loss);

  private:
    int push(Tensor2 val, std::function<void(Tape&, int)> back) {
        nodes_.push_back(Node{std::move(val), {}, std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }
    Tensor2& g(int id) { return nodes_[id].grad; }
    const Tensor2& v(int id) const { return nodes_[id].val; }

    std::vector<Node> nodes_;
    std::vector<Tensor2> captured_stops_;
    const std::vector<Tensor2>* replay_stops_ = nullptr;
    size_t stop_index_ = 0;
    bool replay_ = false;
    bool ran_backward_ = false;
};

}  // namespace odmn
