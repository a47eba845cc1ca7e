#include "evobot/controller.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "evobot/csv.hpp"

namespace evobot {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct CaseName {
  FailureCase c;
  const char* name;
};

constexpr std::array<CaseName, 9> kCaseNames = {{
    {FailureCase::kMotorWeak, "motor_weak"},
    {FailureCase::kLeftWheelDamage, "left_wheel_damage"},
    {FailureCase::kRightWheelDamage, "right_wheel_damage"},
    {FailureCase::kBodyDamage, "body_damage"},
    {FailureCase::kWheelNeuronFail, "wheel_neuron_fail"},
    {FailureCase::kSensorFail, "sensor_fail"},
    {FailureCase::kJointFail, "joint_fail"},
    {FailureCase::kHiddenNeuronFail, "hidden_neuron_fail"},
    {FailureCase::kNothingFail, "nothing_fail"},
}};

}  // namespace

const char* to_string(FailureCase c) {
  for (const auto& n : kCaseNames) {
    if (n.c == c) return n.name;
  }
  return "nothing_fail";
}

FailureCase failure_case_from_string(const std::string& s) {
  for (const auto& n : kCaseNames) {
    if (s == n.name) return n.c;
  }
  throw std::invalid_argument("unknown failure case '" + s + "'");
}

int FailureInjection::chosen_index(int choices) const {
  if (choices <= 1) return 0;
  if (index >= 0) return index % choices;
  return static_cast<int>(splitmix64(rng_seed) % static_cast<std::uint64_t>(choices));
}

int failure_index_choices(FailureCase c, int n_hidden) {
  switch (c) {
    case FailureCase::kMotorWeak:
    case FailureCase::kWheelNeuronFail: return 2;
    case FailureCase::kSensorFail: return kSensorCount;
    case FailureCase::kHiddenNeuronFail: return std::max(1, n_hidden);
    default: return 1;
  }
}

Actuation failure_actuation(const FailureInjection& f, int step) {
  Actuation a;
  if (!f.active(step)) return a;
  switch (f.failure_case) {
    case FailureCase::kMotorWeak:
      (f.chosen_index(2) == 0 ? a.gain_left : a.gain_right) = 1.0 - f.severity;
      break;
    case FailureCase::kLeftWheelDamage: a.gain_left = 0.0; break;
    case FailureCase::kRightWheelDamage: a.gain_right = 0.0; break;
    case FailureCase::kBodyDamage:
      a.clearance_scale = 1.0 - f.severity;
      a.speed_scale = 1.0 - f.severity / 2.0;
      break;
    case FailureCase::kJointFail: a.turn_scale = 0.5; break;
    default: break;
  }
  return a;
}

void apply_sensor_failure(const FailureInjection& f, int step, SensorReading& reading) {
  if (f.failure_case == FailureCase::kSensorFail && f.active(step)) {
    reading.proximity[f.chosen_index(kSensorCount)] = 0.0;
  }
}

Actuation combine(const Actuation& a, const Actuation& b) {
  return {a.gain_left * b.gain_left, a.gain_right * b.gain_right, a.speed_scale * b.speed_scale,
          a.turn_scale * b.turn_scale, a.clearance_scale * b.clearance_scale};
}

MotorCommand effective_command(MotorCommand cmd, const Actuation& a) {
  return {std::clamp(cmd.left, -1.0, 1.0) * a.gain_left, std::clamp(cmd.right, -1.0, 1.0) * a.gain_right};
}

Topology::Topology(int n_hidden) : n_hidden_(std::max(0, n_hidden)) {
  if (n_hidden_ == 0) {
    for (int o = 0; o < kOutputCount; ++o) {
      for (int i = 0; i < kInputCount; ++i) edges_.push_back({i, output_unit(o)});
    }
    hidden_edge_end_ = 0;
    return;
  }
  for (int h = 0; h < n_hidden_; ++h) {
    for (int i = 0; i < kInputCount; ++i) edges_.push_back({i, hidden_unit(h)});
  }
  hidden_edge_end_ = edges_.size();
  for (int o = 0; o < kOutputCount; ++o) {
    for (int h = 0; h < n_hidden_; ++h) edges_.push_back({hidden_unit(h), output_unit(o)});
    edges_.push_back({kBiasInput, output_unit(o)});
  }
}

int Topology::edge_index(int from, int to) const {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].from == from && edges_[e].to == to) return static_cast<int>(e);
  }
  return -1;
}

double hebbian_update(double w, double pre, double post, const PlasticityConfig& cfg) {
  return std::clamp(w + cfg.eta * pre * post, -cfg.weight_clip, cfg.weight_clip);
}

void plasticity_step(const Topology& topology, std::span<double> weights, std::span<const double> activations,
                     const PlasticityConfig& cfg) {
  if (cfg.rule != PlasticityRule::kHebbian || cfg.eta == 0.0) return;
  const auto& edges = topology.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    weights[e] = hebbian_update(weights[e], activations[edges[e].from], activations[edges[e].to], cfg);
  }
}

Controller::Controller(Topology topology, std::vector<double> weights, double threshold,
                       PlasticityConfig plasticity, std::optional<FailureInjection> failure)
    : topology_(std::move(topology)),
      weights_(std::move(weights)),
      threshold_(threshold),
      plasticity_(plasticity),
      failure_(std::move(failure)),
      activations_(static_cast<std::size_t>(topology_.n_units()), 0.0) {
  if (weights_.size() != topology_.edges().size()) {
    throw std::invalid_argument("controller weight count " + std::to_string(weights_.size()) +
                                " does not match topology edge count " +
                                std::to_string(topology_.edges().size()));
  }
}

Controller Controller::random(int n_hidden, std::uint64_t seed, double threshold) {
  Topology t(n_hidden);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(t.edges().size());
  for (auto& x : w) x = u(rng);
  return Controller(std::move(t), std::move(w), threshold);
}

MotorCommand Controller::activate(const SensorReading& raw) {
  const int step = step_++;
  SensorReading reading = raw;
  const FailureInjection* f = failure_ ? &*failure_ : nullptr;
  if (f) apply_sensor_failure(*f, step, reading);

  std::fill(activations_.begin(), activations_.end(), 0.0);
  double sum = 0.0;
  for (int k = 0; k < kSensorCount; ++k) {
    activations_[k] = reading.proximity[k];
    sum += reading.proximity[k];
  }
  activations_[kAlertInput] = sum >= threshold_ ? 1.0 : 0.0;
  activations_[kBiasInput] = 1.0;

  int dead_hidden = -1;
  int dead_output = -1;
  if (f && f->active(step)) {
    if (f->failure_case == FailureCase::kHiddenNeuronFail && topology_.n_hidden() > 0) {
      dead_hidden = topology_.hidden_unit(f->chosen_index(topology_.n_hidden()));
    }
    if (f->failure_case == FailureCase::kWheelNeuronFail) dead_output = topology_.output_unit(f->chosen_index(2));
  }

  const auto& edges = topology_.edges();
  const std::size_t split = topology_.hidden_edge_end();
  std::vector<double>& net = scratch_;
  net.assign(activations_.size(), 0.0);
  for (std::size_t e = 0; e < split; ++e) net[edges[e].to] += weights_[e] * activations_[edges[e].from];
  for (int h = 0; h < topology_.n_hidden(); ++h) {
    const int u = topology_.hidden_unit(h);
    activations_[u] = u == dead_hidden ? 0.0 : std::tanh(net[u]);
  }
  for (std::size_t e = split; e < edges.size(); ++e) net[edges[e].to] += weights_[e] * activations_[edges[e].from];
  for (int o = 0; o < kOutputCount; ++o) {
    const int u = topology_.output_unit(o);
    activations_[u] = u == dead_output ? 0.0 : std::tanh(net[u]);
  }
  return {activations_[topology_.output_unit(0)], activations_[topology_.output_unit(1)]};
}

void Controller::plasticity_step() { evobot::plasticity_step(topology_, weights_, activations_, plasticity_); }

void Controller::reset() {
  std::fill(activations_.begin(), activations_.end(), 0.0);
  step_ = 0;
}

void save_controller(std::ostream& out, const Controller& c) {
  out << "# evobot controller\n";
  out << "version = 1\n";
  out << "n_inputs = " << c.topology().n_inputs() << "\n";
  out << "n_hidden = " << c.topology().n_hidden() << "\n";
  out << "n_outputs = " << c.topology().n_outputs() << "\n";
  out << "threshold = " << csv::num(c.threshold()) << "\n";
  out << "plasticity.rule = " << (c.plasticity().rule == PlasticityRule::kHebbian ? "hebbian" : "none") << "\n";
  out << "plasticity.eta = " << csv::num(c.plasticity().eta) << "\n";
  out << "plasticity.weight_clip = " << csv::num(c.plasticity().weight_clip) << "\n";
  if (c.failure()) {
    const auto& f = *c.failure();
    out << "failure.case = " << to_string(f.failure_case) << "\n";
    out << "failure.onset_step = " << f.onset_step << "\n";
    out << "failure.severity = " << csv::num(f.severity) << "\n";
    out << "failure.rng_seed = " << f.rng_seed << "\n";
    out << "failure.index = " << f.index << "\n";
  } else {
    out << "failure.case = none\n";
  }
  out << "weights.count = " << c.weights().size() << "\n";
  out << "weights =";
  for (double w : c.weights()) out << ' ' << csv::num(w);
  out << "\n";
}

Controller load_controller(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("controller line " + std::to_string(line_no) + ": missing '='");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("controller file missing key '" + key + "'");
    return it->second;
  };
  if (get("version") != "1") throw std::runtime_error("unsupported controller version " + get("version"));
  if (std::stoi(get("n_inputs")) != kInputCount || std::stoi(get("n_outputs")) != kOutputCount) {
    throw std::runtime_error("controller input/output dimensions do not match this build");
  }
  Topology topology(std::stoi(get("n_hidden")));
  std::vector<double> weights;
  std::istringstream ws(get("weights"));
  std::string tok;
  while (ws >> tok) weights.push_back(csv::to_double(tok));
  if (weights.size() != static_cast<std::size_t>(std::stoul(get("weights.count")))) {
    throw std::runtime_error("controller weights.count does not match the weight list");
  }
  PlasticityConfig p;
  p.rule = get("plasticity.rule") == "hebbian" ? PlasticityRule::kHebbian : PlasticityRule::kNone;
  p.eta = csv::to_double(get("plasticity.eta"));
  p.weight_clip = csv::to_double(get("plasticity.weight_clip"));
  std::optional<FailureInjection> failure;
  if (get("failure.case") != "none") {
    FailureInjection f;
    f.failure_case = failure_case_from_string(get("failure.case"));
    f.onset_step = std::stoi(get("failure.onset_step"));
    f.severity = csv::to_double(get("failure.severity"));
    f.rng_seed = std::stoull(get("failure.rng_seed"));
    f.index = std::stoi(get("failure.index"));
    failure = f;
  }
  return Controller(std::move(topology), std::move(weights), csv::to_double(get("threshold")), p, failure);
}

Controller controller_from_bodyplan(const BodyPlan& bp, std::uint64_t seed, double threshold) {
  Controller c = Controller::random(bp.count_neurons(NeuronKind::kHidden), seed, threshold);
  const Topology& t = c.topology();
  // Unit of each plan neuron in the controller, or -1 when it has no counterpart.
  std::vector<int> unit(bp.neurons.size(), -1);
  int touch = 0, motor = 0, hidden = 0;
  for (std::size_t i = 0; i < bp.neurons.size(); ++i) {
    switch (bp.neurons[i].kind) {
      case NeuronKind::kTouch:
        if (touch < kSensorCount) unit[i] = touch;
        ++touch;
        break;
      case NeuronKind::kMotor:
        if (motor < kOutputCount) unit[i] = t.output_unit(motor);
        ++motor;
        break;
      case NeuronKind::kHidden: unit[i] = t.hidden_unit(hidden++); break;
    }
  }
  auto& w = c.mutable_weights();
  for (const auto& conn : bp.connections) {
    if (unit[conn.from] < 0 || unit[conn.to] < 0) continue;
    const int e = t.edge_index(unit[conn.from], unit[conn.to]);
    if (e >= 0) w[e] = conn.weight;
  }
  for (std::size_t i = 0; i < bp.neurons.size(); ++i) {
    if (bp.neurons[i].params.empty() || unit[i] < kInputCount) continue;
    const int e = t.edge_index(kBiasInput, unit[i]);
    if (e >= 0) w[e] = bp.neurons[i].params.front();
  }
  return c;
}

const char* to_string(Primitive p) {
  switch (p) {
    case Primitive::kForward: return "forward";
    case Primitive::kTurnLeft: return "turn_left";
    case Primitive::kTurnRight: return "turn_right";
    case Primitive::kAvoid: return "avoid";
    case Primitive::kSeek: return "seek";
  }
  return "forward";
}

Primitive primitive_from_string(const std::string& s) {
  for (Primitive p : {Primitive::kForward, Primitive::kTurnLeft, Primitive::kTurnRight, Primitive::kAvoid,
                      Primitive::kSeek}) {
    if (s == to_string(p)) return p;
  }
  throw std::invalid_argument("unknown primitive '" + s + "'");
}

MotorCommand primitive_command(Primitive p, const World& world, const RobotBody& body, const RobotState& state,
                               const SensorReading& reading) {
  switch (p) {
    case Primitive::kForward: return {1.0, 1.0};
    case Primitive::kTurnLeft: return {-0.5, 0.5};
    case Primitive::kTurnRight: return {0.5, -0.5};
    case Primitive::kAvoid: {
      const auto it = std::max_element(reading.proximity.begin(), reading.proximity.end());
      if (*it <= 0.0) return {1.0, 1.0};
      const double bearing = body.sensor_bearings[static_cast<std::size_t>(it - reading.proximity.begin())];
      return bearing > 0.0 ? MotorCommand{0.5, -0.5} : MotorCommand{-0.5, 0.5};
    }
    case Primitive::kSeek: {
      const double to_target = std::atan2(world.target.center.y - state.y, world.target.center.x - state.x);
      const double beta = std::remainder(to_target - state.heading, 2.0 * std::numbers::pi);
      if (std::abs(beta) > 0.2) return beta > 0 ? MotorCommand{-0.5, 0.5} : MotorCommand{0.5, -0.5};
      return {std::clamp(1.0 - beta, -1.0, 1.0), std::clamp(1.0 + beta, -1.0, 1.0)};
    }
  }
  return {};
}

Trajectory run_primitive_sequence(const PrimitiveSequence& seq, const World& world, const RobotBody& body,
                                  const RobotState& start, const StepConfig& cfg) {
  Trajectory out;
  RobotState state = start;
  int k = 0;
  for (const auto& item : seq) {
    if (item.duration_steps <= 0) throw std::invalid_argument("primitive durations must be positive");
    for (int i = 0; i < item.duration_steps; ++i, ++k) {
      const SensorReading reading = sense(world, body, state);
      const MotorCommand cmd = primitive_command(item.primitive, world, body, state, reading);
      out.push_back({cfg.t_start + k * cfg.dt(), state, cmd, reading});
      state = step(world, body, state, cmd, cfg);
    }
  }
  out.push_back({cfg.t_start + k * cfg.dt(), state, {}, sense(world, body, state)});
  return out;
}

}  // namespace evobot
