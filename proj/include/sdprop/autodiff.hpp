#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace sdprop {

// Rank-2 is all a fully-connected classifier needs, so a tensor here is a
// dense row-major matrix of doubles: samples are rows, features are columns,
// scalars are 1x1.
using Tensor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reverse-mode tape over a small fixed op vocabulary. Nodes are created in
// topological order by construction (operands must already exist), so forward
// walks the tape in creation order and backward walks it in reverse.
class Graph {
 public:
  using NodeId = std::int32_t;

  // Placeholder bound per forward pass; the row count (batch) may vary
  // between passes, the column count is fixed at creation.
  NodeId input(Eigen::Index cols);
  // Trainable tensor. Parameters are flattened row-major, concatenated in
  // creation order, for params_flat()/set_params_flat()/backward().
  NodeId param(Tensor initial);

  NodeId matmul(NodeId a, NodeId b);
  NodeId bias_add(NodeId a, NodeId bias);  // bias is 1 x n, broadcast to rows
  NodeId relu(NodeId a);                   // subgradient at 0 is 0
  NodeId log_softmax(NodeId a);            // row-wise, max-shifted
  // Scalar: -mean over rows of log_probs[row, label[row]]. Labels are bound
  // via bind_labels before forward.
  NodeId nll_loss(NodeId log_probs);
  // Scalar: 0.5 * sum of squares. Handy for quadratic losses in diagnostics
  // and gradient checks; not used by the classifier path.
  NodeId half_sum_squares(NodeId a);

  void bind(NodeId input_id, Tensor value);
  void bind_labels(std::vector<int> labels);

  // Evaluates ancestors of `out` in tape order and returns its value.
  const Tensor& eval(NodeId out);
  // eval() for a scalar node (enforced), e.g. a loss.
  double forward(NodeId out);
  // d(last forward target)/d(params), flattened. Throws StateError if no
  // forward pass has produced a scalar yet.
  Eigen::VectorXd backward();

  const Tensor& value(NodeId id) const;  // after eval/forward
  Eigen::Index num_params() const { return num_param_values_; }
  Eigen::VectorXd params_flat() const;
  void set_params_flat(const Eigen::VectorXd& flat);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Input,
    Param,
    MatMul,
    BiasAdd,
    Relu,
    LogSoftmax,
    NllLoss,
    HalfSumSquares,
  };

  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    Eigen::Index fixed_cols = 0;  // Input only
    Tensor value;
    Tensor grad;
    bool evaluated = false;
  };

  NodeId add_node(Node node);
  const Node& checked(NodeId id, const char* ctx) const;
  std::string describe(NodeId id) const;
  void eval_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
  Eigen::Index num_param_values_ = 0;
  std::vector<int> labels_;
  NodeId last_target_ = -1;
};

struct InitSpec {
  double mean = 0.0;
  double stddev = 0.01;
  std::uint64_t seed = 0;
};

// A fully-connected softmax classifier assembled on a Graph:
// layer_sizes = {in, hidden..., out}, ReLU between affine layers, log-softmax
// and mean negative log-likelihood on top. Weights are N(mean, stddev^2)
// drawn from a generator seeded only by init.seed; biases start at zero.
class MlpClassifier {
 public:
  MlpClassifier(std::vector<int> layer_sizes, InitSpec init);

  // Mean NLL of the batch; leaves the tape ready for gradient().
  double loss(const Tensor& x, const std::vector<int>& labels);
  Eigen::VectorXd gradient();  // after loss()
  // Row-wise argmax of the class log-probabilities.
  std::vector<int> predict(const Tensor& x);

  struct BatchEval {
    double loss = 0.0;        // mean NLL over the batch
    Eigen::Index correct = 0; // rows whose argmax matches the label
  };
  // Loss and hit count in a single forward pass (no gradient bookkeeping).
  BatchEval evaluate(const Tensor& x, const std::vector<int>& labels);

  Eigen::Index num_params() const { return graph_.num_params(); }
  Eigen::VectorXd params_flat() const { return graph_.params_flat(); }
  void set_params_flat(const Eigen::VectorXd& flat) { graph_.set_params_flat(flat); }

  Graph& graph() { return graph_; }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

 private:
  std::vector<int> layer_sizes_;
  Graph graph_;
  Graph::NodeId input_ = -1;
  Graph::NodeId log_probs_ = -1;
  Graph::NodeId loss_ = -1;
};

MlpClassifier build_mlp(std::vector<int> layer_sizes, InitSpec init);

}  // namespace sdprop
