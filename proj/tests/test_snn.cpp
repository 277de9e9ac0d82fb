#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "hybridscreen/errors.hpp"
#include "hybridscreen/metrics.hpp"
#include "hybridscreen/snn.hpp"

using namespace hybridscreen;

namespace {

double population_sd(const Eigen::MatrixXd& m) {
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().mean());
}

SnnModel hand_net(OutputKind output) {
  SnnModel net;
  net.activation = Activation::relu;
  net.output = output;
  DenseLayer<double> hidden;
  hidden.weights.resize(2, 1);
  hidden.weights << 1.0, 2.0;
  hidden.bias = Eigen::VectorXd::Zero(2);
  DenseLayer<double> out;
  out.weights.resize(1, 2);
  out.weights << 0.5, 0.25;
  out.bias = Eigen::VectorXd::Constant(1, 0.1);
  net.layers = {hidden, out};
  return net;
}

// Central differences of the batch loss with respect to every parameter.
Gradients<double> numeric_gradients(SnnModel net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const DropoutMasks<double>* masks, double dropout, double h) {
  Gradients<double> g;
  for (auto& layer : net.layers) {
    Eigen::MatrixXd gw(layer.weights.rows(), layer.weights.cols());
    for (Index i = 0; i < gw.rows(); ++i) {
      for (Index j = 0; j < gw.cols(); ++j) {
        const double keep = layer.weights(i, j);
        layer.weights(i, j) = keep + h;
        const double up = loss(net, x, y, masks, dropout);
        layer.weights(i, j) = keep - h;
        const double down = loss(net, x, y, masks, dropout);
        layer.weights(i, j) = keep;
        gw(i, j) = (up - down) / (2 * h);
      }
    }
    Eigen::VectorXd gb(layer.bias.size());
    for (Index i = 0; i < gb.size(); ++i) {
      const double keep = layer.bias(i);
      layer.bias(i) = keep + h;
      const double up = loss(net, x, y, masks, dropout);
      layer.bias(i) = keep - h;
      const double down = loss(net, x, y, masks, dropout);
      layer.bias(i) = keep;
      gb(i) = (up - down) / (2 * h);
    }
    g.weights.push_back(gw);
    g.bias.push_back(gb);
  }
  return g;
}

// Relative error with an absolute floor so that exact zeros compare sanely.
double max_relative_error(const Gradients<double>& a, const Gradients<double>& b) {
  constexpr double kFloor = 1e-7;
  double worst = 0.0;
  auto visit = [&](const auto& p, const auto& q) {
    for (Index i = 0; i < p.size(); ++i) {
      const double u = p.data()[i];
      const double v = q.data()[i];
      worst = std::max(worst, std::abs(u - v) / std::max({std::abs(u), std::abs(v), kFloor}));
    }
  };
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    visit(a.weights[l], b.weights[l]);
    visit(a.bias[l], b.bias[l]);
  }
  return worst;
}

SnnModel random_model(std::uint64_t seed, Index in, int layers, Activation act, OutputKind out) {
  SnnHyperparams hp;
  hp.hidden_layers = layers;
  hp.hidden_units = 4;
  hp.activation = act;
  hp.init = InitMode::glorot_normal;
  hp.seed = seed;
  auto net = init_model(hp, in, out);
  Rng rng(seed ^ 0x55);
  std::normal_distribution<double> b(0.0, 0.3);
  for (auto& layer : net.layers)
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = b(rng);
  return net;
}

}  // namespace

TEST_SUITE("snn") {
  TEST_CASE("initialization") {
    SnnHyperparams hp;
    hp.hidden_units = 1000;
    hp.seed = 3;
    const auto he = init_model(hp, 100);
    CHECK(he.layers[0].bias.isZero(0.0));
    CHECK(he.layers[1].bias.isZero(0.0));
    CHECK(he.layers[0].weights.size() == 100000);
    CHECK(std::abs(population_sd(he.layers[0].weights) / std::sqrt(0.02) - 1.0) < 0.03);

    const auto again = init_model(hp, 100);
    CHECK(again.layers[0].weights == he.layers[0].weights);
    CHECK(again.layers[1].weights == he.layers[1].weights);

    hp.init = InitMode::he_uniform;
    const auto hu = init_model(hp, 100);
    CHECK(hu.layers[0].weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 100));
    CHECK(std::abs(population_sd(hu.layers[0].weights) / std::sqrt(2.0 / 100) - 1.0) < 0.03);

    hp.init = InitMode::lecun_uniform;
    const auto lu = init_model(hp, 100);
    CHECK(lu.layers[0].weights.cwiseAbs().maxCoeff() <= std::sqrt(3.0 / 100));

    hp.init = InitMode::uniform;
    CHECK(init_model(hp, 100).layers[0].weights.cwiseAbs().maxCoeff() <= 0.05);

    hp.init = InitMode::normal;
    CHECK(std::abs(population_sd(init_model(hp, 100).layers[0].weights) / 0.05 - 1.0) < 0.03);

    hp.init = InitMode::glorot_normal;
    CHECK(std::abs(population_sd(init_model(hp, 100).layers[0].weights) / std::sqrt(2.0 / 1100) - 1.0) < 0.03);
  }

  TEST_CASE("layer shapes chain") {
    SnnHyperparams hp;
    hp.hidden_layers = 3;
    hp.hidden_units = 7;
    const auto net = init_model(hp, 5);
    REQUIRE(net.layers.size() == 4);
    CHECK(net.input_dim() == 5);
    CHECK(net.layers[0].weights.rows() == 7);
    CHECK(net.layers[1].weights.cols() == 7);
    CHECK(net.layers[3].weights.rows() == 1);
    CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(2, 4)), DataError);
  }

  TEST_CASE("zero weights give one half") {
    auto net = init_model(SnnHyperparams{}, 3);
    for (auto& layer : net.layers) layer.weights.setZero();
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3);
    const auto out = forward(net, x);
    CHECK(out.isApprox(Eigen::VectorXd::Constant(6, 0.5)));
  }

  TEST_CASE("no dropout means training forward equals inference") {
    SnnHyperparams hp;
    hp.seed = 4;
    const auto net = init_model(hp, 3);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 3);
    Rng rng(1);
    CHECK(forward(net, x, 0.0, rng) == forward(net, x));
  }

  TEST_CASE("hand-computed 1x2x1 network with dropout") {
    const auto net = hand_net(OutputKind::linear_value);
    Eigen::MatrixXd x(1, 1);
    x << 1.0;
    // hidden relu(1), relu(2); output 0.5*h1 + 0.25*h2 + 0.1
    CHECK(forward(net, x)(0) == doctest::Approx(1.1));
    DropoutMasks<double> ones{Eigen::MatrixXd::Ones(1, 2)};
    CHECK(forward_cached(net, x, &ones, 0.5).output(0) == doctest::Approx(2.1));
    DropoutMasks<double> first{Eigen::MatrixXd(1, 2)};
    first[0] << 1.0, 0.0;
    CHECK(forward_cached(net, x, &first, 0.5).output(0) == doctest::Approx(1.1));
    const auto prob = hand_net(OutputKind::sigmoid_probability);
    CHECK(forward_cached(prob, x, &ones, 0.5).output(0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.1))));
  }

  TEST_CASE("inverted dropout preserves expected hidden activation") {
    SnnHyperparams hp;
    hp.hidden_units = 6;
    hp.seed = 8;
    const auto net = init_model(hp, 3);
    Eigen::MatrixXd x(1, 3);
    x << 0.7, -1.2, 2.0;
    const Eigen::MatrixXd plain = forward_cached<double>(net, x, nullptr, 0.0).post[0];
    for (double d : {0.2, 0.5, 0.8}) {
      Rng rng(9);
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(1, 6);
      const int reps = 10000;
      for (int r = 0; r < reps; ++r) {
        const auto masks = draw_masks(net, 1, d, rng);
        acc += forward_cached(net, x, &masks, d).post[0];
      }
      acc /= reps;
      for (Index j = 0; j < 6; ++j) {
        if (plain(0, j) == 0.0) {
          CHECK(acc(0, j) == 0.0);
        } else {
          // relative tolerance loosens with d because the mask variance grows
          CHECK(std::abs(acc(0, j) / plain(0, j) - 1.0) < 0.02 * std::sqrt(d / (1 - d)) / std::sqrt(0.25));
        }
      }
    }
  }

  TEST_CASE("analytic gradients match central differences") {
    const double h = 1e-5;
    for (auto act : {Activation::relu, Activation::sigmoid}) {
      for (auto out : {OutputKind::sigmoid_probability, OutputKind::linear_value}) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
          Rng rng(seed);
          const int layers = 1 + static_cast<int>(seed % 3);
          const auto net = random_model(seed, 3, layers, act, out);
          const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
          Eigen::VectorXd y(5);
          for (Index i = 0; i < 5; ++i) y(i) = out == OutputKind::sigmoid_probability ? double(rng() % 2) : x(i, 0);
          worst = std::max(worst, max_relative_error(gradients(net, x, y), numeric_gradients(net, x, y, nullptr, 0.0, h)));

          const auto masks = draw_masks(net, 5, 0.3, rng);
          worst = std::max(worst, max_relative_error(gradients(net, x, y, &masks, 0.3),
                                                     numeric_gradients(net, x, y, &masks, 0.3, h)));
        }
        INFO("activation " << to_string(act) << ", output " << to_string(out));
        CHECK(worst < 1e-5);
      }
    }
  }

  TEST_CASE("gradient symmetries") {
    auto net = init_model(SnnHyperparams{}, 2);
    for (auto& layer : net.layers) layer.weights.setZero();
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
    Eigen::VectorXd y(4);
    y << 1, 0, 1, 0;
    CHECK(gradients(net, x, y).bias.back()(0) == 0.0);

    SnnHyperparams hp;
    hp.seed = 12;
    const auto reg = init_model(hp, 2, OutputKind::linear_value);
    const Eigen::VectorXd perfect = forward(reg, x);
    const auto g = gradients(reg, x, perfect);
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      CHECK(g.weights[l].isZero(0.0));
      CHECK(g.bias[l].isZero(0.0));
    }
  }

  TEST_CASE("training fits separable blobs") {
    const auto t = fixtures::blobs(1);
    SnnHyperparams hp;
    hp.epochs = 50;
    hp.seed = 2;
    const auto r = train(t.matrix, t.y(), hp, OutputKind::sigmoid_probability);
    CHECK(r.loss_log.size() == 50);
    CHECK(auc_roc(forward(r.model, t.matrix), t.y()) >= 0.99);
    // after warm-up, upticks stay under 5%
    for (std::size_t e = 5; e + 1 < r.loss_log.size(); ++e) CHECK(r.loss_log[e + 1] <= r.loss_log[e] * 1.05);
  }

  TEST_CASE("training fits a linear target") {
    const auto t = fixtures::linear_regression(2);
    SnnHyperparams hp;
    hp.epochs = 200;
    hp.seed = 3;
    const auto r = train(t.matrix, t.y(), hp, OutputKind::linear_value);
    CHECK(r2(forward(r.model, t.matrix), t.y()) >= 0.95);
  }

  TEST_CASE("training is deterministic and inference is pure") {
    const auto t = fixtures::blobs(4, 60);
    SnnHyperparams hp;
    hp.epochs = 5;
    hp.dropout = 0.3;
    hp.batch_size = 16;
    hp.seed = 11;
    const auto a = train(t.matrix, t.y(), hp, OutputKind::sigmoid_probability);
    const auto b = train(t.matrix, t.y(), hp, OutputKind::sigmoid_probability);
    CHECK(a.loss_log == b.loss_log);
    CHECK(forward(a.model, t.matrix) == forward(b.model, t.matrix));
    CHECK(forward(a.model, t.matrix) == forward(a.model, t.matrix));
  }

  TEST_CASE("single precision network") {
    const auto t = fixtures::blobs(5, 80);
    SnnHyperparams hp;
    hp.epochs = 30;
    hp.seed = 5;
    const auto r = train<float>(t.matrix, t.y(), hp, OutputKind::sigmoid_probability);
    const Eigen::VectorXd scores = forward(r.model, t.matrix.cast<float>()).cast<double>();
    CHECK(auc_roc(scores, t.y()) >= 0.99);
  }

  TEST_CASE("hyperparameter ranges and failures") {
    const auto t = fixtures::blobs(6, 10);
    SnnHyperparams hp;
    hp.epochs = 0;
    CHECK_THROWS_AS(train(t.matrix, t.y(), hp, OutputKind::sigmoid_probability), ConfigError);
    hp = SnnHyperparams{};
    hp.dropout = 1.0;
    CHECK_THROWS_AS(hp.validate(), ConfigError);
    hp = SnnHyperparams{};
    hp.batch_size = 0;
    CHECK_THROWS_AS(hp.validate(), ConfigError);
    hp = SnnHyperparams{};
    hp.learning_rate = 0.0;
    CHECK_THROWS_AS(hp.validate(), ConfigError);
    CHECK_THROWS_AS(train(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), SnnHyperparams{}, OutputKind::linear_value),
                    DataError);
    Eigen::MatrixXd bad = t.matrix;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(train(bad, t.y(), SnnHyperparams{}, OutputKind::linear_value), TrainingDiverged);
  }

  TEST_CASE("enum names round-trip") {
    for (auto m : {InitMode::uniform, InitMode::lecun_uniform, InitMode::normal, InitMode::glorot_normal,
                   InitMode::he_normal, InitMode::he_uniform})
      CHECK(parse_init_mode(to_string(m)) == m);
    for (auto a : {Activation::relu, Activation::sigmoid}) CHECK(parse_activation(to_string(a)) == a);
    CHECK_THROWS(parse_activation("tanh"));
  }
}
