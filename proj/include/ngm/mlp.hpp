#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "ngm/dataset.hpp"

// Fully connected regression MLP with scalar output, trained by plain
// mini-batch gradient descent on mean-squared error, and the two input
// importance measures read off its weights.
namespace ngm::nn {

enum class Activation { tanh, relu, identity };

const char* to_string(Activation a);
Activation parse_activation(const std::string& name);

struct NetConfig {
  // Empty means default_hidden_sizes(input width).
  std::vector<int> hidden_sizes;
  Activation activation = Activation::tanh;
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-2;
  // Weights start i.i.d. uniform on +-scale / sqrt(fan_in); 0 gives an all-zero net.
  double weight_init_scale = 1.0;
  RngSeed seed;

  void validate() const;
};

// [round(20 ln p), round(10 ln p)], each floored at 4.
std::vector<int> default_hidden_sizes(Eigen::Index p);

// weights[t] has shape n_t x n_{t+1}: t = 0 is the input layer, the last
// matrix maps the top hidden layer to the scalar output.
struct TrainedNet {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
  Activation activation = Activation::tanh;
  // Full-data MSE before training, then after every epoch.
  std::vector<double> loss_trace;

  Eigen::Index input_width() const { return weights.empty() ? 0 : weights.front().rows(); }
  std::size_t hidden_layers() const { return weights.empty() ? 0 : weights.size() - 1; }

  VectorXd predict(const MatrixXd& inputs) const;
  double predict_one(const VectorXd& point) const;

  // Shapes compose and the output is scalar.
  void validate() const;
};

TrainedNet train(const MatrixXd& inputs, const VectorXd& targets, const NetConfig& config);

enum class ImportanceKind { path_product, gradient };

struct ImportanceVector {
  VectorXd values;
  ImportanceKind kind = ImportanceKind::path_product;
};

// L(X_j) = < Omega^(0)_j, Omega^(1) ... Omega^(k) >: the sum over every
// input-to-output path of the product of its weights. Biases and activations
// play no part.
ImportanceVector path_importance(const TrainedNet& net);

// dy/dX_j at `at_point` = Omega^(0)_j G^(1) Omega^(1) ... G^(k) Omega^(k),
// G^(t) the diagonal of activation derivatives at hidden layer t.
ImportanceVector gradient_importance(const TrainedNet& net, const VectorXd& at_point);

nlohmann::json to_json(const TrainedNet& net);
TrainedNet net_from_json(const nlohmann::json& j);
void save_net(const TrainedNet& net, const std::string& path);
TrainedNet load_net(const std::string& path);

}  // namespace ngm::nn
