#pragma once

// Feed-forward tanh controller mapping the ten proximity readings to the two
// wheel commands, plus Hebbian lifetime plasticity, hand-coded behavioral
// primitives and the nine failure injections.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evobot/genotype.hpp"
#include "evobot/world.hpp"

namespace evobot {

// Input units: proximity 0..9, alert, bias.
inline constexpr int kAlertInput = kSensorCount;
inline constexpr int kBiasInput = kSensorCount + 1;
inline constexpr int kInputCount = kSensorCount + 2;
inline constexpr int kOutputCount = 2;

enum class FailureCase {
  kMotorWeak = 1,
  kLeftWheelDamage,
  kRightWheelDamage,
  kBodyDamage,
  kWheelNeuronFail,
  kSensorFail,
  kJointFail,
  kHiddenNeuronFail,
  kNothingFail,
};

inline constexpr std::array<FailureCase, 9> kAllFailureCases = {
    FailureCase::kMotorWeak,        FailureCase::kLeftWheelDamage, FailureCase::kRightWheelDamage,
    FailureCase::kBodyDamage,       FailureCase::kWheelNeuronFail, FailureCase::kSensorFail,
    FailureCase::kJointFail,        FailureCase::kHiddenNeuronFail, FailureCase::kNothingFail};

const char* to_string(FailureCase c);
FailureCase failure_case_from_string(const std::string& s);

struct FailureInjection {
  FailureCase failure_case = FailureCase::kNothingFail;
  int onset_step = 0;
  double severity = 0.5;
  std::uint64_t rng_seed = 0;
  // Which wheel / sensor / neuron is hit. Negative means "pick from rng_seed".
  int index = -1;

  bool active(int step) const { return step >= onset_step; }
  int chosen_index(int choices) const;
  bool operator==(const FailureInjection&) const = default;
};

// Number of index choices a case selects among (1 when the case has none).
int failure_index_choices(FailureCase c, int n_hidden);

// Physical part of a failure: MotorWeak, wheel damage, body damage, joint failure.
Actuation failure_actuation(const FailureInjection& f, int step);
// A failed sensor reads 0 from onset on.
void apply_sensor_failure(const FailureInjection& f, int step, SensorReading& reading);

Actuation combine(const Actuation& a, const Actuation& b);
// Wheel command after motor gains, as the wheel actually executes it.
MotorCommand effective_command(MotorCommand cmd, const Actuation& a);

struct Edge {
  int from = 0;
  int to = 0;
  bool operator==(const Edge&) const = default;
};

// Layered feed-forward topology. With no hidden units the inputs connect
// straight to the outputs; otherwise inputs feed the hidden layer and the
// hidden layer plus bias feed the outputs. Edges are grouped by target layer.
class Topology {
 public:
  explicit Topology(int n_hidden = 0);

  int n_inputs() const { return kInputCount; }
  int n_hidden() const { return n_hidden_; }
  int n_outputs() const { return kOutputCount; }
  int n_units() const { return kInputCount + n_hidden_ + kOutputCount; }
  int hidden_unit(int k) const { return kInputCount + k; }
  int output_unit(int k) const { return kInputCount + n_hidden_ + k; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Edges [0, hidden_edge_end) target hidden units, the rest target outputs.
  std::size_t hidden_edge_end() const { return hidden_edge_end_; }
  // Position of edge from->to, or -1.
  int edge_index(int from, int to) const;

  bool operator==(const Topology& o) const { return n_hidden_ == o.n_hidden_; }

 private:
  int n_hidden_ = 0;
  std::vector<Edge> edges_;
  std::size_t hidden_edge_end_ = 0;
};

enum class PlasticityRule { kNone, kHebbian };

struct PlasticityConfig {
  PlasticityRule rule = PlasticityRule::kNone;
  double eta = 0.0;
  double weight_clip = 4.0;
  bool operator==(const PlasticityConfig&) const = default;
};

// w + eta * pre * post, clipped to [-weight_clip, weight_clip].
double hebbian_update(double w, double pre, double post, const PlasticityConfig& cfg);

// Applies one Hebbian step to every edge given the unit activations.
void plasticity_step(const Topology& topology, std::span<double> weights, std::span<const double> activations,
                     const PlasticityConfig& cfg);

inline constexpr double kDefaultThreshold = 1.0;

class Controller {
 public:
  Controller() : Controller(Topology(0), std::vector<double>(Topology(0).edges().size(), 0.0)) {}
  Controller(Topology topology, std::vector<double> weights, double threshold = kDefaultThreshold,
             PlasticityConfig plasticity = {}, std::optional<FailureInjection> failure = std::nullopt);

  // Weights uniform in [-1, 1] from `seed`.
  static Controller random(int n_hidden, std::uint64_t seed, double threshold = kDefaultThreshold);

  // One forward pass. The network sees the raw proximities plus an alert
  // input that is 1 iff the proximity sum reaches the threshold. Sensor and
  // neuron failures are applied here; wheel and body failures are physical
  // and come from failure_actuation().
  MotorCommand activate(const SensorReading& reading);

  // Hebbian update over the activations of the last activate() call.
  // No-op unless the rule is Hebbian.
  void plasticity_step();

  // Clears activations and the step counter; weights are kept.
  void reset();

  const Topology& topology() const { return topology_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& mutable_weights() { return weights_; }
  const std::vector<double>& activations() const { return activations_; }
  double threshold() const { return threshold_; }
  const PlasticityConfig& plasticity() const { return plasticity_; }
  void set_plasticity(const PlasticityConfig& p) { plasticity_ = p; }
  const std::optional<FailureInjection>& failure() const { return failure_; }
  void set_failure(std::optional<FailureInjection> f) { failure_ = std::move(f); }
  int steps() const { return step_; }

  bool operator==(const Controller& o) const {
    return topology_ == o.topology_ && weights_ == o.weights_ && threshold_ == o.threshold_ &&
           plasticity_ == o.plasticity_ && failure_ == o.failure_;
  }

 private:
  Topology topology_;
  std::vector<double> weights_;
  double threshold_ = kDefaultThreshold;
  PlasticityConfig plasticity_;
  std::optional<FailureInjection> failure_;
  std::vector<double> activations_;
  std::vector<double> scratch_;
  int step_ = 0;
};

// Versioned key-value text; stable key order.
void save_controller(std::ostream& out, const Controller& c);
Controller load_controller(std::istream& in);

// Hidden count = hidden neurons in the plan. Touch neurons map to proximity
// inputs and motor neurons to the left/right outputs in textual order; plan
// connections and biases that land on an existing edge set its weight, every
// other edge is drawn from `seed`.
Controller controller_from_bodyplan(const BodyPlan& bp, std::uint64_t seed,
                                    double threshold = kDefaultThreshold);

enum class Primitive { kForward, kTurnLeft, kTurnRight, kAvoid, kSeek };

struct PrimitiveStep {
  Primitive primitive = Primitive::kForward;
  int duration_steps = 1;
};

using PrimitiveSequence = std::vector<PrimitiveStep>;

const char* to_string(Primitive p);
Primitive primitive_from_string(const std::string& s);

// Command a primitive issues for the current reading and pose.
MotorCommand primitive_command(Primitive p, const World& world, const RobotBody& body, const RobotState& state,
                               const SensorReading& reading);

// Runs the primitives in order; one sample per step.
Trajectory run_primitive_sequence(const PrimitiveSequence& seq, const World& world, const RobotBody& body,
                                  const RobotState& start, const StepConfig& cfg = {});

}  // namespace evobot
