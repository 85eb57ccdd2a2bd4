#include "ngm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "ngm/error.hpp"

namespace ngm::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  fail(ErrorKind::configuration, "unknown activation '" + name + "'");
}

void NetConfig::validate() const {
  for (int h : hidden_sizes)
    if (h < 1) fail(ErrorKind::configuration, "hidden layer sizes must be positive");
  if (epochs < 0) fail(ErrorKind::configuration, "epochs must be non-negative");
  if (batch_size < 1) fail(ErrorKind::configuration, "batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    fail(ErrorKind::configuration, "learning_rate must be positive");
  if (!(weight_init_scale >= 0.0) || !std::isfinite(weight_init_scale))
    fail(ErrorKind::configuration, "weight_init_scale must be non-negative");
}

std::vector<int> default_hidden_sizes(Eigen::Index p) {
  const double lp = std::log(static_cast<double>(std::max<Eigen::Index>(p, 1)));
  return {std::max(4, static_cast<int>(std::lround(20.0 * lp))), std::max(4, static_cast<int>(std::lround(10.0 * lp)))};
}

namespace {

template <class Derived>
MatrixXd activate(const Eigen::MatrixBase<Derived>& pre, Activation a) {
  switch (a) {
    // 1 - 2 / (e^{2x} + 1) vectorizes where the double tanh does not.
    case Activation::tanh: return (1.0 - 2.0 / ((2.0 * pre.array()).exp() + 1.0)).matrix();
    case Activation::relu: return pre.array().max(0.0).matrix();
    case Activation::identity: return pre;
  }
  return pre;
}

template <class Derived>
MatrixXd derivative(const Eigen::MatrixBase<Derived>& pre, Activation a) {
  switch (a) {
    case Activation::tanh: return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::relu: return (pre.array() > 0.0).template cast<double>().matrix();
    case Activation::identity: return MatrixXd::Ones(pre.rows(), pre.cols());
  }
  return pre;
}

// Same derivative expressed through the activation output, which the
// training loop already holds.
MatrixXd derivative_from_output(const MatrixXd& act, Activation a) {
  switch (a) {
    case Activation::tanh: return (1.0 - act.array().square()).matrix();
    case Activation::relu: return (act.array() > 0.0).cast<double>().matrix();
    case Activation::identity: return MatrixXd::Ones(act.rows(), act.cols());
  }
  return act;
}

struct Forward {
  std::vector<MatrixXd> pre;   // pre-activations of hidden layers
  std::vector<MatrixXd> acts;  // acts[0] = input, acts[t] = hidden layer t
  VectorXd out;
};

Forward forward(const TrainedNet& net, const MatrixXd& x) {
  Forward f;
  const std::size_t k = net.hidden_layers();
  f.acts.reserve(k + 1);
  f.pre.reserve(k);
  f.acts.push_back(x);
  for (std::size_t t = 0; t < k; ++t) {
    MatrixXd z = f.acts[t] * net.weights[t];
    z.rowwise() += net.biases[t].transpose();
    f.acts.push_back(activate(z, net.activation));
    f.pre.push_back(std::move(z));
  }
  f.out = (f.acts[k] * net.weights[k]).col(0).array() + net.biases[k](0);
  return f;
}

double mse(const VectorXd& pred, const VectorXd& y) { return (pred - y).squaredNorm() / static_cast<double>(y.size()); }

}  // namespace

VectorXd TrainedNet::predict(const MatrixXd& inputs) const {
  if (inputs.cols() != input_width()) fail(ErrorKind::invalid_data, "input width does not match the network");
  return forward(*this, inputs).out;
}

double TrainedNet::predict_one(const VectorXd& point) const { return predict(point.transpose())(0); }

void TrainedNet::validate() const {
  if (weights.size() < 2) fail(ErrorKind::invalid_data, "network needs at least one hidden layer");
  if (biases.size() != weights.size()) fail(ErrorKind::invalid_data, "bias count does not match layer count");
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (t + 1 < weights.size() && weights[t].cols() != weights[t + 1].rows())
      fail(ErrorKind::invalid_data, "weight shapes do not compose at layer " + std::to_string(t));
    if (biases[t].size() != weights[t].cols()) fail(ErrorKind::invalid_data, "bias shape mismatch");
  }
  if (weights.back().cols() != 1) fail(ErrorKind::invalid_data, "network output must be scalar");
}

TrainedNet train(const MatrixXd& inputs, const VectorXd& targets, const NetConfig& config) {
  config.validate();
  const Eigen::Index n = inputs.rows();
  const Eigen::Index d = inputs.cols();
  if (targets.size() != n) fail(ErrorKind::invalid_data, "targets length does not match input rows");
  if (d < 1) fail(ErrorKind::invalid_data, "network needs at least one input");
  if (n < config.batch_size)
    fail(ErrorKind::configuration,
         "n = " + std::to_string(n) + " is smaller than batch_size = " + std::to_string(config.batch_size));
  if (!inputs.allFinite() || !targets.allFinite()) fail(ErrorKind::invalid_data, "training data is not finite");

  const std::vector<int> hidden = config.hidden_sizes.empty() ? default_hidden_sizes(d) : config.hidden_sizes;

  TrainedNet net;
  net.activation = config.activation;
  auto engine = config.seed.engine();
  std::vector<Eigen::Index> widths{d};
  for (int h : hidden) widths.push_back(h);
  widths.push_back(1);
  for (std::size_t t = 0; t + 1 < widths.size(); ++t) {
    const double bound = config.weight_init_scale / std::sqrt(static_cast<double>(widths[t]));
    MatrixXd w(widths[t], widths[t + 1]);
    if (bound > 0.0) {
      std::uniform_real_distribution<double> ud(-bound, bound);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = ud(engine);
    } else {
      w.setZero();
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(VectorXd::Zero(widths[t + 1]));
  }

  const std::size_t k = net.hidden_layers();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  net.loss_trace.push_back(mse(forward(net, inputs).out, targets));
  TrainedNet best = net;
  double best_loss = net.loss_trace.back();

  MatrixXd xb;
  VectorXd yb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), engine);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      xb.resize(b, d);
      yb.resize(b);
      for (Eigen::Index r = 0; r < b; ++r) {
        xb.row(r) = inputs.row(order[static_cast<std::size_t>(start + r)]);
        yb(r) = targets(order[static_cast<std::size_t>(start + r)]);
      }
      const Forward f = forward(net, xb);
      MatrixXd delta = (2.0 / static_cast<double>(b)) * (f.out - yb);
      for (std::size_t t = k + 1; t-- > 0;) {
        const MatrixXd grad_w = f.acts[t].transpose() * delta;
        const VectorXd grad_b = delta.colwise().sum().transpose();
        if (t > 0)
          delta = (delta * net.weights[t].transpose()).cwiseProduct(derivative_from_output(f.acts[t], net.activation));
        net.weights[t] -= config.learning_rate * grad_w;
        net.biases[t] -= config.learning_rate * grad_b;
      }
    }
    const double loss = mse(forward(net, inputs).out, targets);
    net.loss_trace.push_back(loss);
    if (!std::isfinite(loss))
      throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1), net.loss_trace);
    if (loss < best_loss) {
      best_loss = loss;
      best.weights = net.weights;
      best.biases = net.biases;
    }
  }

  // The returned weights are those with the lowest full-data loss seen.
  best.loss_trace = std::move(net.loss_trace);
  return best;
}

ImportanceVector path_importance(const TrainedNet& net) {
  net.validate();
  VectorXd c = net.weights.back().col(0);
  for (std::size_t t = net.weights.size() - 1; t-- > 1;) c = net.weights[t] * c;
  return {net.weights.front() * c, ImportanceKind::path_product};
}

ImportanceVector gradient_importance(const TrainedNet& net, const VectorXd& at_point) {
  net.validate();
  if (at_point.size() != net.input_width()) fail(ErrorKind::invalid_data, "evaluation point has the wrong width");
  const Forward f = forward(net, at_point.transpose());
  VectorXd r = net.weights.back().col(0);
  for (std::size_t t = net.hidden_layers(); t-- > 0;) {
    const VectorXd g = derivative(f.pre[t], net.activation).row(0).transpose();
    r = net.weights[t] * g.cwiseProduct(r);
  }
  return {r, ImportanceKind::gradient};
}

nlohmann::json to_json(const TrainedNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t t = 0; t < net.weights.size(); ++t) {
    const MatrixXd& w = net.weights[t];
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) values.push_back(w(i, j));
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weights", values},
                      {"bias", std::vector<double>(net.biases[t].data(), net.biases[t].data() + net.biases[t].size())}});
  }
  return {{"activation", to_string(net.activation)}, {"layers", layers}, {"loss_trace", net.loss_trace}};
}

TrainedNet net_from_json(const nlohmann::json& j) {
  TrainedNet net;
  try {
    net.activation = parse_activation(j.at("activation").get<std::string>());
    for (const auto& layer : j.at("layers")) {
      const auto rows = layer.at("rows").get<Eigen::Index>();
      const auto cols = layer.at("cols").get<Eigen::Index>();
      const auto values = layer.at("weights").get<std::vector<double>>();
      const auto bias = layer.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != rows * cols || static_cast<Eigen::Index>(bias.size()) != cols)
        fail(ErrorKind::invalid_data, "weight snapshot has inconsistent shapes");
      MatrixXd w(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = values[static_cast<std::size_t>(r * cols + c)];
      net.weights.push_back(std::move(w));
      net.biases.push_back(Eigen::Map<const VectorXd>(bias.data(), cols));
    }
    if (j.contains("loss_trace")) net.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_data, std::string("malformed weight snapshot: ") + e.what());
  }
  net.validate();
  return net;
}

void save_net(const TrainedNet& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::configuration, "cannot open " + path + " for writing");
  os << to_json(net).dump(2) << '\n';
}

TrainedNet load_net(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::configuration, "cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_data, std::string("cannot parse ") + path + ": " + e.what());
  }
  return net_from_json(j);
}

}  // namespace ngm::nn
