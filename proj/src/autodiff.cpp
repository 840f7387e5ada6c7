#include "sdprop/autodiff.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "sdprop/error.hpp"

namespace sdprop {

namespace {

const char* op_name(int op) {
  static const char* names[] = {"input",       "param",   "matmul",
                                "bias_add",    "relu",    "log_softmax",
                                "nll_loss",    "half_sum_squares"};
  return names[op];
}

}  // namespace

Graph::NodeId Graph::add_node(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Graph::Node& Graph::checked(NodeId id, const char* ctx) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw DimensionError(std::string(ctx) + ": no node with id " +
                         std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

std::string Graph::describe(NodeId id) const {
  return std::string(op_name(static_cast<int>(nodes_[id].op))) + " (node " +
         std::to_string(id) + ")";
}

Graph::NodeId Graph::input(Eigen::Index cols) {
  if (cols < 1) throw DimensionError("input: column count must be >= 1");
  Node n;
  n.op = Op::Input;
  n.fixed_cols = cols;
  return add_node(std::move(n));
}

Graph::NodeId Graph::param(Tensor initial) {
  if (initial.size() == 0) throw DimensionError("param: empty initial value");
  Node n;
  n.op = Op::Param;
  n.value = std::move(initial);
  NodeId id = add_node(std::move(n));
  params_.push_back(id);
  num_param_values_ += nodes_[id].value.size();
  return id;
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  checked(a, "matmul");
  checked(b, "matmul");
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  return add_node(std::move(n));
}

Graph::NodeId Graph::bias_add(NodeId a, NodeId bias) {
  checked(a, "bias_add");
  checked(bias, "bias_add");
  Node n;
  n.op = Op::BiasAdd;
  n.a = a;
  n.b = bias;
  return add_node(std::move(n));
}

Graph::NodeId Graph::relu(NodeId a) {
  checked(a, "relu");
  Node n;
  n.op = Op::Relu;
  n.a = a;
  return add_node(std::move(n));
}

Graph::NodeId Graph::log_softmax(NodeId a) {
  checked(a, "log_softmax");
  Node n;
  n.op = Op::LogSoftmax;
  n.a = a;
  return add_node(std::move(n));
}

Graph::NodeId Graph::nll_loss(NodeId log_probs) {
  checked(log_probs, "nll_loss");
  Node n;
  n.op = Op::NllLoss;
  n.a = log_probs;
  return add_node(std::move(n));
}

Graph::NodeId Graph::half_sum_squares(NodeId a) {
  checked(a, "half_sum_squares");
  Node n;
  n.op = Op::HalfSumSquares;
  n.a = a;
  return add_node(std::move(n));
}

void Graph::bind(NodeId input_id, Tensor value) {
  const Node& n = checked(input_id, "bind");
  if (n.op != Op::Input) {
    throw StateError("bind: " + describe(input_id) + " is not an input");
  }
  if (value.cols() != n.fixed_cols) {
    throw DimensionError("bind: " + describe(input_id) + " expects " +
                         std::to_string(n.fixed_cols) + " columns, got " +
                         std::to_string(value.cols()));
  }
  if (value.rows() < 1) {
    throw DimensionError("bind: " + describe(input_id) + ": empty batch");
  }
  nodes_[input_id].value = std::move(value);
}

void Graph::bind_labels(std::vector<int> labels) {
  labels_ = std::move(labels);
}

void Graph::eval_node(NodeId id) {
  Node& n = nodes_[id];
  if (n.evaluated) return;
  switch (n.op) {
    case Op::Input:
      if (n.value.size() == 0) {
        throw StateError("forward: " + describe(id) + " was never bound");
      }
      break;
    case Op::Param:
      break;
    case Op::MatMul: {
      eval_node(n.a);
      eval_node(n.b);
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      if (a.cols() != b.rows()) {
        throw DimensionError("forward: " + describe(id) + ": cannot multiply " +
                             std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " by " +
                             std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
      }
      n.value.noalias() = a * b;
      break;
    }
    case Op::BiasAdd: {
      eval_node(n.a);
      eval_node(n.b);
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      if (b.rows() != 1 || b.cols() != a.cols()) {
        throw DimensionError("forward: " + describe(id) + ": bias is " +
                             std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ", operand has " +
                             std::to_string(a.cols()) + " columns");
      }
      n.value = a;
      n.value.rowwise() += b.row(0);
      break;
    }
    case Op::Relu: {
      eval_node(n.a);
      n.value = nodes_[n.a].value.cwiseMax(0.0);
      break;
    }
    case Op::LogSoftmax: {
      eval_node(n.a);
      const Tensor& a = nodes_[n.a].value;
      n.value.resize(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double m = a.row(r).maxCoeff();
        const double lse = std::log((a.row(r).array() - m).exp().sum()) + m;
        n.value.row(r) = (a.row(r).array() - lse).matrix();
      }
      break;
    }
    case Op::NllLoss: {
      eval_node(n.a);
      const Tensor& lp = nodes_[n.a].value;
      if (static_cast<Eigen::Index>(labels_.size()) != lp.rows()) {
        throw DimensionError("forward: " + describe(id) + ": " +
                             std::to_string(labels_.size()) + " labels for " +
                             std::to_string(lp.rows()) + " rows");
      }
      double total = 0.0;
      for (Eigen::Index r = 0; r < lp.rows(); ++r) {
        const int y = labels_[static_cast<std::size_t>(r)];
        if (y < 0 || y >= lp.cols()) {
          throw DimensionError("forward: " + describe(id) + ": label " +
                               std::to_string(y) + " out of range for " +
                               std::to_string(lp.cols()) + " classes");
        }
        total -= lp(r, y);
      }
      n.value.resize(1, 1);
      n.value(0, 0) = total / static_cast<double>(lp.rows());
      break;
    }
    case Op::HalfSumSquares: {
      eval_node(n.a);
      n.value.resize(1, 1);
      n.value(0, 0) = 0.5 * nodes_[n.a].value.squaredNorm();
      break;
    }
  }
  n.evaluated = true;
}

const Tensor& Graph::eval(NodeId out) {
  checked(out, "eval");
  for (Node& n : nodes_) {
    n.evaluated = false;
  }
  eval_node(out);
  return nodes_[out].value;
}

double Graph::forward(NodeId out) {
  const Tensor& v = eval(out);
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("forward: " + describe(out) + " is " +
                         std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()) + ", expected a scalar");
  }
  last_target_ = out;
  return v(0, 0);
}

Eigen::VectorXd Graph::backward() {
  if (last_target_ < 0) {
    throw StateError("backward: no forward pass has evaluated a scalar loss yet");
  }
  // (Re)initialize adjoints for the evaluated subgraph.
  for (Node& n : nodes_) {
    if (n.evaluated) {
      n.grad.setZero(n.value.rows(), n.value.cols());
    } else {
      n.grad.resize(0, 0);
    }
  }
  nodes_[last_target_].grad(0, 0) = 1.0;

  for (NodeId id = last_target_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.evaluated || n.grad.size() == 0) continue;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
        break;
      case Op::MatMul: {
        Node& a = nodes_[n.a];
        Node& b = nodes_[n.b];
        a.grad.noalias() += n.grad * b.value.transpose();
        b.grad.noalias() += a.value.transpose() * n.grad;
        break;
      }
      case Op::BiasAdd: {
        nodes_[n.a].grad += n.grad;
        nodes_[n.b].grad.row(0) += n.grad.colwise().sum();
        break;
      }
      case Op::Relu: {
        Node& a = nodes_[n.a];
        a.grad.array() +=
            n.grad.array() * (a.value.array() > 0.0).cast<double>();
        break;
      }
      case Op::LogSoftmax: {
        Node& a = nodes_[n.a];
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
          const double row_sum = n.grad.row(r).sum();
          a.grad.row(r).array() +=
              n.grad.row(r).array() -
              n.value.row(r).array().exp() * row_sum;
        }
        break;
      }
      case Op::NllLoss: {
        Node& a = nodes_[n.a];
        const double s = n.grad(0, 0) / static_cast<double>(a.value.rows());
        for (Eigen::Index r = 0; r < a.value.rows(); ++r) {
          a.grad(r, labels_[static_cast<std::size_t>(r)]) -= s;
        }
        break;
      }
      case Op::HalfSumSquares: {
        nodes_[n.a].grad += n.grad(0, 0) * nodes_[n.a].value;
        break;
      }
    }
  }

  Eigen::VectorXd flat(num_param_values_);
  Eigen::Index offset = 0;
  for (NodeId pid : params_) {
    const Node& p = nodes_[pid];
    if (p.grad.size() == 0) {
      flat.segment(offset, p.value.size()).setZero();
    } else {
      flat.segment(offset, p.value.size()) =
          Eigen::Map<const Eigen::VectorXd>(p.grad.data(), p.grad.size());
    }
    offset += p.value.size();
  }
  return flat;
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = checked(id, "value");
  if (!n.evaluated) {
    throw StateError("value: " + describe(id) + " has not been evaluated");
  }
  return n.value;
}

Eigen::VectorXd Graph::params_flat() const {
  Eigen::VectorXd flat(num_param_values_);
  Eigen::Index offset = 0;
  for (NodeId pid : params_) {
    const Tensor& v = nodes_[pid].value;
    flat.segment(offset, v.size()) =
        Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    offset += v.size();
  }
  return flat;
}

void Graph::set_params_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != num_param_values_) {
    throw DimensionError("set_params_flat: got " + std::to_string(flat.size()) +
                         " values, graph has " +
                         std::to_string(num_param_values_) + " parameters");
  }
  Eigen::Index offset = 0;
  for (NodeId pid : params_) {
    Tensor& v = nodes_[pid].value;
    Eigen::Map<Eigen::VectorXd>(v.data(), v.size()) =
        flat.segment(offset, v.size());
    offset += v.size();
  }
}

// ---------------------------------------------------------------------------

MlpClassifier::MlpClassifier(std::vector<int> layer_sizes, InitSpec init)
    : layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) {
    throw ConfigError("an MLP needs at least input and output layer sizes");
  }
  for (int s : layer_sizes_) {
    if (s < 1) throw ConfigError("layer sizes must be >= 1");
  }
  if (init.stddev < 0.0) throw ConfigError("init stddev must be >= 0");

  std::mt19937_64 rng(init.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Tensor w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        w(r, c) = init.mean + init.stddev * (init.stddev == 0.0 ? 0.0 : normal(rng));
      }
    }
    return w;
  };

  input_ = graph_.input(layer_sizes_.front());
  Graph::NodeId h = input_;
  const std::size_t n_layers = layer_sizes_.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Eigen::Index in = layer_sizes_[l];
    const Eigen::Index out = layer_sizes_[l + 1];
    Graph::NodeId w = graph_.param(gaussian(in, out));
    Graph::NodeId b = graph_.param(Tensor::Zero(1, out));
    Graph::NodeId z = graph_.bias_add(graph_.matmul(h, w), b);
    h = (l + 1 < n_layers) ? graph_.relu(z) : z;
  }
  log_probs_ = graph_.log_softmax(h);
  loss_ = graph_.nll_loss(log_probs_);
}

double MlpClassifier::loss(const Tensor& x, const std::vector<int>& labels) {
  graph_.bind(input_, x);
  graph_.bind_labels(labels);
  return graph_.forward(loss_);
}

Eigen::VectorXd MlpClassifier::gradient() { return graph_.backward(); }

MlpClassifier::BatchEval MlpClassifier::evaluate(const Tensor& x,
                                                 const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw DimensionError("evaluate: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(x.rows()) + " rows");
  }
  graph_.bind(input_, x);
  const Tensor& lp = graph_.eval(log_probs_);
  BatchEval result;
  double total = 0.0;
  for (Eigen::Index r = 0; r < lp.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= lp.cols()) {
      throw DimensionError("evaluate: label " + std::to_string(y) +
                           " out of range for " + std::to_string(lp.cols()) +
                           " classes");
    }
    total -= lp(r, y);
    Eigen::Index best = 0;
    lp.row(r).maxCoeff(&best);
    if (static_cast<int>(best) == y) ++result.correct;
  }
  result.loss = total / static_cast<double>(lp.rows());
  return result;
}

std::vector<int> MlpClassifier::predict(const Tensor& x) {
  graph_.bind(input_, x);
  const Tensor& lp = graph_.eval(log_probs_);
  std::vector<int> out(static_cast<std::size_t>(lp.rows()));
  for (Eigen::Index r = 0; r < lp.rows(); ++r) {
    Eigen::Index best = 0;
    lp.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

MlpClassifier build_mlp(std::vector<int> layer_sizes, InitSpec init) {
  return MlpClassifier(std::move(layer_sizes), init);
}

}  // namespace sdprop
