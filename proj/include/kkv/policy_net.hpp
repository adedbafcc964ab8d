#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kkv/airframe.hpp"
#include "kkv/rng.hpp"

namespace kkv {

// Four-layer recurrent network sizing. Hidden layer 2 is a GRU; the
// geometric-mean rule h2 = round(sqrt(h1 h3)) sets its width.
struct NetworkDims {
  int in = 0;
  int h1 = 0;
  int h2 = 0;
  int h3 = 0;
  int out = 0;

  static NetworkDims policy(int obs_dim, int act_dim) {
    NetworkDims d;
    d.in = obs_dim;
    d.h1 = 10 * obs_dim;
    d.h3 = 10 * act_dim;
    d.h2 = static_cast<int>(std::lround(std::sqrt(double(d.h1) * double(d.h3))));
    d.out = 2 * act_dim;  // two logits per action element
    return d;
  }

  static NetworkDims value(int obs_dim) {
    NetworkDims d;
    d.in = obs_dim;
    d.h1 = 10 * obs_dim;
    d.h3 = 5;
    d.h2 = static_cast<int>(std::lround(std::sqrt(double(d.h1) * double(d.h3))));
    d.out = 1;
    return d;
  }

  bool operator==(const NetworkDims&) const = default;
};

// Parameters of one network: dense tanh -> GRU -> dense tanh -> dense linear.
// Bias tensors are stored n x 1 so every named tensor is a matrix.
struct NetParams {
  NetworkDims dims;
  Eigen::MatrixXd w1, b1;
  Eigen::MatrixXd wz, uz, bz, wr, ur, br, wh, uh, bh;
  Eigen::MatrixXd w3, b3, w4, b4;

  void resize(const NetworkDims& d);
  void set_zero();
  // Uniform +/- sqrt(1/fan_in) on every tensor.
  void init(RngStream& rng);

  // Canonical tensor ordering shared by the serializer, optimizer, and
  // gradient checks.
  template <class Fn>
  void for_each(Fn&& fn) {
    fn("w1", w1); fn("b1", b1);
    fn("wz", wz); fn("uz", uz); fn("bz", bz);
    fn("wr", wr); fn("ur", ur); fn("br", br);
    fn("wh", wh); fn("uh", uh); fn("bh", bh);
    fn("w3", w3); fn("b3", b3);
    fn("w4", w4); fn("b4", b4);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    const_cast<NetParams*>(this)->for_each(
        [&fn](const char* name, Eigen::MatrixXd& m) { fn(name, static_cast<const Eigen::MatrixXd&>(m)); });
  }
};

// Per-step activations cached for backpropagation through time. Step t lives
// in column t.
struct ForwardTrace {
  Eigen::MatrixXd a1, z, r, hc, h, a3, out;
  void resize(const NetworkDims& d, int steps);
};

// Policy and value parameter set for one agent.
struct NetworkParams {
  int obs_dim = 11;
  int act_dim = kNumGroups;
  NetParams policy;
  NetParams value;

  static NetworkParams make(int obs_dim, int act_dim, std::uint64_t seed);
};

// Single forward step. `hidden` carries the recurrent state (resized and
// zeroed at episode start by the caller via reset_hidden).
Eigen::VectorXd net_forward(const NetParams& p, const Eigen::VectorXd& input,
                            Eigen::VectorXd& hidden);

// Forward over a whole observation sequence (rows of `obs`), hidden state
// starting from zero, caching activations for BPTT.
void net_forward_sequence(const NetParams& p, const Eigen::MatrixXd& obs, ForwardTrace& trace);

inline Eigen::VectorXd reset_hidden(const NetworkDims& d) { return Eigen::VectorXd::Zero(d.h2); }

// Ten independent on/off categoricals, one per action element, from paired
// logits (element i owns logits 2i = off, 2i+1 = on).
struct ActionDistribution {
  Eigen::VectorXd p_fire;  // act_dim probabilities of commanding the group

  static ActionDistribution from_logits(const Eigen::VectorXd& logits);
};

ActionCommand sample_action(const ActionDistribution& dist, RngStream& rng, double& logp);
ActionCommand argmax_action(const ActionDistribution& dist, double& logp);

// Log-probability of a stored 0/1 action row under the distribution.
double action_log_prob(const ActionDistribution& dist, const Eigen::VectorXd& action_row);

// Named-tensor weight container on disk; round-trips bit-exactly. Load
// validates shapes against the stated obs/act dims and throws LoadFault
// naming the first mismatched tensor.
void save_weights(const NetworkParams& params, const std::string& path);
NetworkParams load_weights(const std::string& path, int expected_obs_dim = 11,
                           int expected_act_dim = kNumGroups);

}  // namespace kkv
