#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "kkv/faults.hpp"
#include "kkv/policy_net.hpp"

using namespace kkv;

namespace {

// Straightforward scalar re-implementation of the dense-GRU-dense-dense
// stack, loops only. Oracle for the Eigen forward pass.
std::vector<double> scalar_forward(const NetParams& p, const std::vector<double>& x,
                                   std::vector<double>& h) {
  const auto& d = p.dims;
  std::vector<double> a1(d.h1);
  for (int i = 0; i < d.h1; ++i) {
    double s = p.b1(i, 0);
    for (int j = 0; j < d.in; ++j) s += p.w1(i, j) * x[j];
    a1[i] = std::tanh(s);
  }
  std::vector<double> z(d.h2), r(d.h2), hc(d.h2);
  for (int i = 0; i < d.h2; ++i) {
    double sz = p.bz(i, 0), sr = p.br(i, 0);
    for (int j = 0; j < d.h1; ++j) {
      sz += p.wz(i, j) * a1[j];
      sr += p.wr(i, j) * a1[j];
    }
    for (int j = 0; j < d.h2; ++j) {
      sz += p.uz(i, j) * h[j];
      sr += p.ur(i, j) * h[j];
    }
    z[i] = 1.0 / (1.0 + std::exp(-sz));
    r[i] = 1.0 / (1.0 + std::exp(-sr));
  }
  for (int i = 0; i < d.h2; ++i) {
    double sh = p.bh(i, 0);
    for (int j = 0; j < d.h1; ++j) sh += p.wh(i, j) * a1[j];
    for (int j = 0; j < d.h2; ++j) sh += p.uh(i, j) * (r[j] * h[j]);
    hc[i] = std::tanh(sh);
  }
  for (int i = 0; i < d.h2; ++i) h[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
  std::vector<double> a3(d.h3);
  for (int i = 0; i < d.h3; ++i) {
    double s = p.b3(i, 0);
    for (int j = 0; j < d.h2; ++j) s += p.w3(i, j) * h[j];
    a3[i] = std::tanh(s);
  }
  std::vector<double> out(d.out);
  for (int i = 0; i < d.out; ++i) {
    double s = p.b4(i, 0);
    for (int j = 0; j < d.h3; ++j) s += p.w4(i, j) * a3[j];
    out[i] = s;
  }
  return out;
}

}  // namespace

TEST_CASE("network dims follow the sizing rule") {
  const NetworkDims p = NetworkDims::policy(11, 10);
  CHECK(p.h1 == 110);
  CHECK(p.h3 == 100);
  CHECK(p.h2 == 105);  // round(sqrt(11000)) = round(104.88)
  CHECK(p.out == 20);
  const NetworkDims v = NetworkDims::value(11);
  CHECK(v.h1 == 110);
  CHECK(v.h3 == 5);
  CHECK(v.h2 == 23);  // round(sqrt(550)) = round(23.45)
  CHECK(v.out == 1);
}

TEST_CASE("zero weights give zero logits and p = 0.5 everywhere") {
  NetworkParams np = NetworkParams::make(11, 10, 1);
  np.policy.set_zero();
  Eigen::VectorXd hidden = reset_hidden(np.policy.dims);
  const Eigen::VectorXd logits = net_forward(np.policy, Eigen::VectorXd::Zero(11), hidden);
  CHECK(logits.norm() == 0.0);
  const auto dist = ActionDistribution::from_logits(logits);
  for (int i = 0; i < 10; ++i) CHECK(dist.p_fire[i] == doctest::Approx(0.5));
  np.value.set_zero();
  Eigen::VectorXd vh = reset_hidden(np.value.dims);
  CHECK(net_forward(np.value, Eigen::VectorXd::Zero(11), vh)[0] == 0.0);
}

TEST_CASE("forward pass matches a scalar loop oracle on a tiny network") {
  NetworkParams np;
  np.obs_dim = 2;
  np.act_dim = 1;
  np.policy.resize({2, 2, 2, 2, 2});
  RngStream rng(5, 5);
  np.policy.init(rng);

  Eigen::VectorXd hidden = reset_hidden(np.policy.dims);
  std::vector<double> h_oracle(2, 0.0);
  RngStream obs_rng(6, 6);
  for (int t = 0; t < 8; ++t) {
    Eigen::VectorXd x(2);
    x << obs_rng.normal(), obs_rng.normal();
    const Eigen::VectorXd out = net_forward(np.policy, x, hidden);
    const std::vector<double> oracle = scalar_forward(np.policy, {x[0], x[1]}, h_oracle);
    for (int i = 0; i < 2; ++i) CHECK(out[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
    for (int i = 0; i < 2; ++i) CHECK(hidden[i] == doctest::Approx(h_oracle[i]).epsilon(1e-14));
  }
}

TEST_CASE("sequence forward equals stepwise forward") {
  NetworkParams np = NetworkParams::make(11, 10, 3);
  RngStream rng(7, 0);
  const int steps = 6;
  Eigen::MatrixXd obs(steps, 11);
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < 11; ++i) obs(t, i) = rng.normal();
  }
  ForwardTrace trace;
  net_forward_sequence(np.policy, obs, trace);
  Eigen::VectorXd hidden = reset_hidden(np.policy.dims);
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd out = net_forward(np.policy, obs.row(t).transpose(), hidden);
    CHECK((out - trace.out.col(t)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((hidden - trace.h.col(t)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("deterministic forward: same inputs, same logits") {
  NetworkParams np = NetworkParams::make(11, 10, 11);
  Eigen::VectorXd h1 = reset_hidden(np.policy.dims);
  Eigen::VectorXd h2 = reset_hidden(np.policy.dims);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(11, -1.0, 1.0);
  const Eigen::VectorXd a = net_forward(np.policy, x, h1);
  const Eigen::VectorXd b = net_forward(np.policy, x, h2);
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("softmax pairs") {
  Eigen::VectorXd logits(4);
  logits << std::log(3.0), 0.0, 2.0, 1.0;
  const auto dist = ActionDistribution::from_logits(logits);
  // Pair 0: p(off) = 0.75, p(on) = 0.25.
  CHECK(dist.p_fire[0] == doctest::Approx(0.25).epsilon(1e-12));
  // Probabilities sum to one by construction; argmax picks action 0 for
  // logits (2, 1).
  double logp = 0.0;
  const ActionCommand cmd = argmax_action(dist, logp);
  CHECK_FALSE(cmd.fire[1]);
  CHECK(logp < 0.0);
  CHECK(std::isfinite(logp));
}

TEST_CASE("sampling statistics at p = 0.5") {
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(20);
  const auto dist = ActionDistribution::from_logits(logits);
  RngStream rng(13, 0);
  int fired = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    double logp = 0.0;
    const ActionCommand cmd = sample_action(dist, rng, logp);
    fired += cmd.fire[3] ? 1 : 0;
    CHECK(logp == doctest::Approx(10.0 * std::log(0.5)).epsilon(1e-12));
  }
  CHECK(double(fired) / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("log probability of stored actions") {
  Eigen::VectorXd logits(4);
  logits << std::log(3.0), 0.0, 0.0, 0.0;
  const auto dist = ActionDistribution::from_logits(logits);
  Eigen::VectorXd action(2);
  action << 1.0, 0.0;  // fire pair 0 (p = 0.25), hold pair 1 (p = 0.5)
  CHECK(action_log_prob(dist, action) ==
        doctest::Approx(std::log(0.25) + std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("weight files round-trip bit-exactly") {
  const std::string path = "weights_roundtrip.kkvw";
  NetworkParams np = NetworkParams::make(11, 10, 21);
  save_weights(np, path);
  const NetworkParams loaded = load_weights(path);
  bool identical = true;
  np.policy.for_each([&](const char* name, const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd* other = nullptr;
    loaded.policy.for_each([&](const char* n2, const Eigen::MatrixXd& m2) {
      if (std::string(n2) == name) other = &m2;
    });
    if ((m - *other).cwiseAbs().maxCoeff() != 0.0) identical = false;
  });
  CHECK(identical);

  // Save -> load -> save produces byte-identical files.
  const std::string path2 = "weights_roundtrip2.kkvw";
  save_weights(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("weight loading faults") {
  const std::string path = "weights_fault.kkvw";
  NetworkParams np = NetworkParams::make(11, 10, 22);
  save_weights(np, path);

  SUBCASE("truncated file") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_weights(path), LoadFault);
  }

  SUBCASE("dimension mismatch names the first offending tensor") {
    try {
      load_weights(path, /*expected_obs_dim=*/12, /*expected_act_dim=*/10);
      FAIL("expected LoadFault");
    } catch (const LoadFault& fault) {
      CHECK(fault.tensor == "policy.w1");
    }
  }

  SUBCASE("garbage header") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "not a weight file at all";
    out.close();
    CHECK_THROWS_AS(load_weights(path), LoadFault);
  }
  std::remove(path.c_str());
}

TEST_CASE("weight init spans the fan-in bound") {
  NetworkParams np = NetworkParams::make(11, 10, 33);
  const double bound = std::sqrt(1.0 / 11.0);
  CHECK(np.policy.w1.cwiseAbs().maxCoeff() <= bound);
  CHECK(np.policy.w1.cwiseAbs().maxCoeff() > 0.5 * bound);
  CHECK(np.policy.uz.cwiseAbs().maxCoeff() <= std::sqrt(1.0 / np.policy.dims.h2));
}
