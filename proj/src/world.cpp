#include "evobot/world.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "evobot/csv.hpp"

namespace evobot {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kTerrainWaves = 8;

double wrap_angle(double a) { return std::remainder(a, kTwoPi); }

}  // namespace

const char* to_string(TerrainKind kind) {
  switch (kind) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kBumpy: return "bumpy";
    case TerrainKind::kCombined: return "combined";
  }
  return "flat";
}

TerrainKind terrain_kind_from_string(const std::string& s) {
  if (s == "flat") return TerrainKind::kFlat;
  if (s == "bumpy") return TerrainKind::kBumpy;
  if (s == "combined") return TerrainKind::kCombined;
  throw std::invalid_argument("unknown terrain kind '" + s + "'");
}

Terrain Terrain::make(TerrainKind kind, const Bounds& bounds, double cell_size, double amplitude,
                      std::uint64_t seed) {
  if (cell_size <= 0.0) throw std::invalid_argument("terrain cell_size must be positive");
  Terrain t;
  t.kind_ = kind;
  t.bounds_ = bounds;
  t.cell_size_ = cell_size;
  t.amplitude_ = kind == TerrainKind::kFlat ? 0.0 : amplitude;
  t.seed_ = seed;
  t.nx_ = static_cast<int>(std::ceil(bounds.width() / cell_size)) + 1;
  t.ny_ = static_cast<int>(std::ceil(bounds.height() / cell_size)) + 1;
  t.heights_.assign(static_cast<std::size_t>(t.nx_) * t.ny_, 0.0);
  if (kind == TerrainKind::kFlat) return t;

  struct Wave {
    double weight, kx, ky, phase;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(0.5, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> wavelength(2.0, 5.0);
  std::array<Wave, kTerrainWaves> waves;
  double total = 0.0;
  for (auto& w : waves) {
    w.weight = weight(rng);
    const double dir = angle(rng);
    const double k = kTwoPi / wavelength(rng);
    w.kx = k * std::cos(dir);
    w.ky = k * std::sin(dir);
    w.phase = angle(rng);
    total += w.weight;
  }
  const double mid = 0.5 * (bounds.x_min + bounds.x_max);
  for (int j = 0; j < t.ny_; ++j) {
    for (int i = 0; i < t.nx_; ++i) {
      const double x = bounds.x_min + i * cell_size;
      const double y = bounds.y_min + j * cell_size;
      if (kind == TerrainKind::kCombined && x < mid) continue;
      double h = 0.0;
      for (const auto& w : waves) h += w.weight * std::sin(w.kx * x + w.ky * y + w.phase);
      t.heights_[static_cast<std::size_t>(j) * t.nx_ + i] = t.amplitude_ * h / total;
    }
  }
  return t;
}

double Terrain::height_at(double x, double y) const {
  if (kind_ == TerrainKind::kFlat || heights_.empty()) return 0.0;
  const double fx = std::clamp((x - bounds_.x_min) / cell_size_, 0.0, static_cast<double>(nx_ - 1));
  const double fy = std::clamp((y - bounds_.y_min) / cell_size_, 0.0, static_cast<double>(ny_ - 1));
  const int i = std::min(static_cast<int>(fx), nx_ - 2);
  const int j = std::min(static_cast<int>(fy), ny_ - 2);
  const double u = fx - i;
  const double v = fy - j;
  return (1 - u) * (1 - v) * node(i, j) + u * (1 - v) * node(i + 1, j) + (1 - u) * v * node(i, j + 1) +
         u * v * node(i + 1, j + 1);
}

double Terrain::grade(double x, double y, double heading) const {
  if (kind_ == TerrainKind::kFlat) return 0.0;
  const double eps = 0.5 * cell_size_;
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return (height_at(x + eps * c, y + eps * s) - height_at(x - eps * c, y - eps * s)) / (2.0 * eps);
}

std::array<double, kSensorCount> default_sensor_bearings() {
  constexpr double deg = std::numbers::pi / 180.0;
  return {-165 * deg, -135 * deg, -90 * deg, -45 * deg, -15 * deg,
          15 * deg,   45 * deg,   90 * deg,  135 * deg, 165 * deg};
}

bool RobotBody::valid() const {
  return body_radius > 0 && wheel_base > 0 && wheel_radius > 0 && nominal_clearance > 0 &&
         sensor_range > 0 && omega_max > 0 && slope_gain >= 0;
}

int StepConfig::steps() const {
  return static_cast<int>(std::ceil((t_finish - t_start) / dt() - 1e-9));
}

bool StepConfig::valid() const {
  return dt_min > 0 && dt_min <= dt_max && t_start < t_finish && coarseness >= 0 && coarseness <= 1;
}

RobotState initial_state(const World& world, const RobotBody& body, const Pose& pose) {
  RobotState s;
  s.x = pose.x;
  s.y = pose.y;
  s.heading = pose.heading;
  s.clearance = std::max(0.0, body.nominal_clearance - terrain_roughness(world, body, s.x, s.y, s.heading));
  return s;
}

std::vector<Pose> corner_starts(const Bounds& b, const Target& target, double inset) {
  const std::array<Vec2, 4> corners = {Vec2{b.x_min + inset, b.y_min + inset},
                                       Vec2{b.x_max - inset, b.y_min + inset},
                                       Vec2{b.x_max - inset, b.y_max - inset},
                                       Vec2{b.x_min + inset, b.y_max - inset}};
  std::vector<Pose> out;
  for (const auto& c : corners) {
    out.push_back({c.x, c.y, std::atan2(target.center.y - c.y, target.center.x - c.x)});
  }
  return out;
}

World make_world(const WorldConfig& cfg, const RobotBody& body) {
  if (cfg.obstacles < 0) throw std::invalid_argument("obstacle count must be >= 0");
  World w;
  w.bounds = cfg.bounds;
  w.target = cfg.target;
  w.gravity = cfg.gravity;
  w.seed = cfg.seed;
  w.terrain = Terrain::make(cfg.terrain, cfg.bounds, cfg.cell_size, cfg.amplitude, cfg.seed);
  w.starts = corner_starts(cfg.bounds, cfg.target, cfg.corner_inset * body.body_radius);

  // Obstacles use their own stream so the terrain does not shift them.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> radius(cfg.obstacle_radius_min, cfg.obstacle_radius_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r_body = body.body_radius;
  for (int k = 0; k < cfg.obstacles; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Obstacle o;
      o.radius = radius(rng);
      o.center.x = cfg.bounds.x_min + o.radius + unit(rng) * (cfg.bounds.width() - 2 * o.radius);
      o.center.y = cfg.bounds.y_min + o.radius + unit(rng) * (cfg.bounds.height() - 2 * o.radius);
      bool ok = true;
      for (const auto& s : w.starts) {
        if (std::hypot(o.center.x - s.x, o.center.y - s.y) - o.radius - r_body < r_body) ok = false;
      }
      const double to_target = std::hypot(o.center.x - cfg.target.center.x, o.center.y - cfg.target.center.y);
      if (to_target - o.radius - cfg.target.radius < r_body) ok = false;
      for (const auto& other : w.obstacles) {
        if (std::hypot(o.center.x - other.center.x, o.center.y - other.center.y) < o.radius + other.radius) {
          ok = false;
        }
      }
      if (ok) {
        w.obstacles.push_back(o);
        placed = true;
      }
    }
    if (!placed) {
      throw PlacementError("could not place obstacle " + std::to_string(k + 1) + " of " +
                           std::to_string(cfg.obstacles) + " in 1000 attempts");
    }
  }
  return w;
}

World make_world(TerrainKind kind, int obstacles, std::uint64_t seed) {
  WorldConfig cfg;
  cfg.terrain = kind;
  cfg.obstacles = obstacles;
  cfg.seed = seed;
  return make_world(cfg);
}

bool collides(const World& world, const RobotBody& body, double x, double y) {
  const double r = body.body_radius;
  const Bounds& b = world.bounds;
  if (x - r < b.x_min || x + r > b.x_max || y - r < b.y_min || y + r > b.y_max) return true;
  for (const auto& o : world.obstacles) {
    if (std::hypot(x - o.center.x, y - o.center.y) < o.radius + r) return true;
  }
  return false;
}

double terrain_roughness(const World& world, const RobotBody& body, double x, double y, double heading) {
  if (world.terrain.kind() == TerrainKind::kFlat) return 0.0;
  const double r = body.body_radius;
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const std::array<double, 5> h = {
      world.terrain.height_at(x, y),         world.terrain.height_at(x + r * c, y + r * s),
      world.terrain.height_at(x - r * c, y - r * s), world.terrain.height_at(x - r * s, y + r * c),
      world.terrain.height_at(x + r * s, y - r * c)};
  const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
  return *hi - *lo;
}

RobotState step(const World& world, const RobotBody& body, const RobotState& state, MotorCommand motor,
                const StepConfig& cfg, const Actuation& act) {
  const double dt = cfg.dt();
  const double w_left = std::clamp(motor.left, -1.0, 1.0) * act.gain_left * body.omega_max;
  const double w_right = std::clamp(motor.right, -1.0, 1.0) * act.gain_right * body.omega_max;

  const double grade = world.terrain.grade(state.x, state.y, state.heading);
  const double slope_factor =
      std::max(0.0, 1.0 - body.slope_gain * (world.gravity / kStandardGravity) * std::max(0.0, grade));
  const double v = body.wheel_radius * (w_left + w_right) / 2.0 * slope_factor * act.speed_scale;
  const double omega = body.wheel_radius * (w_right - w_left) / body.wheel_base * act.turn_scale;

  RobotState next = state;
  const double mid_heading = state.heading + 0.5 * omega * dt;
  const double nx = state.x + v * dt * std::cos(mid_heading);
  const double ny = state.y + v * dt * std::sin(mid_heading);
  next.heading = wrap_angle(state.heading + omega * dt);
  next.contact = false;
  if (v != 0.0) {
    if (collides(world, body, nx, ny)) {
      next.contact = true;
    } else {
      next.x = nx;
      next.y = ny;
    }
  }
  next.wheel_angle_left = state.wheel_angle_left + std::abs(w_left) * dt;
  next.wheel_angle_right = state.wheel_angle_right + std::abs(w_right) * dt;
  next.rate_left = w_left;
  next.rate_right = w_right;
  next.clearance = std::max(0.0, body.nominal_clearance * act.clearance_scale -
                                     terrain_roughness(world, body, next.x, next.y, next.heading));
  return next;
}

double ray_distance(const World& world, const RobotBody& body, const RobotState& state, double bearing) {
  const double a = state.heading + bearing;
  const double ux = std::cos(a);
  const double uy = std::sin(a);
  const double px = state.x + body.body_radius * ux;
  const double py = state.y + body.body_radius * uy;
  double best = std::numeric_limits<double>::infinity();

  const Bounds& b = world.bounds;
  if (ux > 0) best = std::min(best, (b.x_max - px) / ux);
  if (ux < 0) best = std::min(best, (b.x_min - px) / ux);
  if (uy > 0) best = std::min(best, (b.y_max - py) / uy);
  if (uy < 0) best = std::min(best, (b.y_min - py) / uy);
  best = std::max(best, 0.0);

  for (const auto& o : world.obstacles) {
    const double dx = px - o.center.x;
    const double dy = py - o.center.y;
    const double c = dx * dx + dy * dy - o.radius * o.radius;
    if (c <= 0.0) return 0.0;  // ray origin on or inside the obstacle
    const double bq = dx * ux + dy * uy;
    const double disc = bq * bq - c;
    if (disc < 0.0 || bq > 0.0) continue;
    const double t = -bq - std::sqrt(disc);
    if (t >= 0.0) best = std::min(best, t);
  }
  return best;
}

SensorReading sense(const World& world, const RobotBody& body, const RobotState& state) {
  SensorReading r;
  for (int k = 0; k < kSensorCount; ++k) {
    const double d = ray_distance(world, body, state, body.sensor_bearings[k]);
    r.proximity[k] = std::max(0.0, 1.0 - d / body.sensor_range);
  }
  r.touch = state.contact;
  r.rotation_rate_left = state.rate_left;
  r.rotation_rate_right = state.rate_right;
  return r;
}

bool reached_target(const World& world, const RobotBody& body, const RobotState& state) {
  return std::hypot(state.x - world.target.center.x, state.y - world.target.center.y) <=
         world.target.radius + body.body_radius;
}

double target_gap(const World& world, const RobotBody& body, double x, double y) {
  const double d = std::hypot(x - world.target.center.x, y - world.target.center.y);
  return std::max(0.0, d - world.target.radius - body.body_radius);
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectorySample> samples) {
  out << "t,x,y,heading,clearance,motor_l,motor_r";
  for (int k = 0; k < kSensorCount; ++k) out << ",s" << k;
  out << ",rot_l,rot_r,touch\n";
  for (const auto& s : samples) {
    out << csv::num(s.t) << ',' << csv::num(s.state.x) << ',' << csv::num(s.state.y) << ','
        << csv::num(s.state.heading) << ',' << csv::num(s.state.clearance) << ',' << csv::num(s.motor.left)
        << ',' << csv::num(s.motor.right);
    for (double p : s.reading.proximity) out << ',' << csv::num(p);
    out << ',' << csv::num(s.reading.rotation_rate_left) << ',' << csv::num(s.reading.rotation_rate_right)
        << ',' << (s.reading.touch ? 1 : 0) << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto cells = csv::split(line);
    if (cells.size() != 7 + kSensorCount + 3) {
      throw std::runtime_error("trajectory row has " + std::to_string(cells.size()) + " columns");
    }
    TrajectorySample s;
    std::size_t c = 0;
    s.t = csv::to_double(cells[c++]);
    s.state.x = csv::to_double(cells[c++]);
    s.state.y = csv::to_double(cells[c++]);
    s.state.heading = csv::to_double(cells[c++]);
    s.state.clearance = csv::to_double(cells[c++]);
    s.motor.left = csv::to_double(cells[c++]);
    s.motor.right = csv::to_double(cells[c++]);
    for (auto& p : s.reading.proximity) p = csv::to_double(cells[c++]);
    s.reading.rotation_rate_left = csv::to_double(cells[c++]);
    s.reading.rotation_rate_right = csv::to_double(cells[c++]);
    s.reading.touch = cells[c++] == "1";
    s.state.rate_left = s.reading.rotation_rate_left;
    s.state.rate_right = s.reading.rotation_rate_right;
    s.state.contact = s.reading.touch;
    out.push_back(s);
  }
  return out;
}

}  // namespace evobot
