#pragma once

// 2.5D world for a two-wheeled robot: heightfield terrain, circular
// obstacles, a circular target, differential-drive kinematics and ray-cast
// proximity sensing. Everything here is deterministic; World and RobotBody
// are immutable once built and can be shared between threads.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evobot {

inline constexpr int kSensorCount = 10;
inline constexpr double kStandardGravity = 9.81;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct Bounds {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 10.0;
  double y_max = 10.0;
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool operator==(const Bounds&) const = default;
};

enum class TerrainKind { kFlat, kBumpy, kCombined };

const char* to_string(TerrainKind kind);
TerrainKind terrain_kind_from_string(const std::string& s);

class Terrain {
 public:
  // Flat: all zero. Bumpy: a sum of 8 seeded sinusoids scaled so that
  // |height| <= amplitude. Combined: bumpy for x >= the bounds midline,
  // flat elsewhere.
  static Terrain make(TerrainKind kind, const Bounds& bounds, double cell_size, double amplitude,
                      std::uint64_t seed);

  TerrainKind kind() const { return kind_; }
  double cell_size() const { return cell_size_; }
  double amplitude() const { return amplitude_; }
  std::uint64_t seed() const { return seed_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const std::vector<double>& heights() const { return heights_; }
  double node(int i, int j) const { return heights_[static_cast<std::size_t>(j) * nx_ + i]; }

  // Bilinear interpolation of the grid, clamped to the covered area.
  double height_at(double x, double y) const;
  // Directional derivative of height_at along `heading` (positive = uphill).
  double grade(double x, double y, double heading) const;

 private:
  TerrainKind kind_ = TerrainKind::kFlat;
  Bounds bounds_;
  double cell_size_ = 0.25;
  double amplitude_ = 0.0;
  std::uint64_t seed_ = 0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> heights_;
};

struct Obstacle {
  Vec2 center;
  double radius = 0.5;
  bool operator==(const Obstacle&) const = default;
};

struct Target {
  Vec2 center{5.0, 5.0};
  double radius = 0.5;
  bool operator==(const Target&) const = default;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  bool operator==(const Pose&) const = default;
};

struct World {
  Terrain terrain;
  std::vector<Obstacle> obstacles;
  Target target;
  Bounds bounds;
  double gravity = kStandardGravity;
  // Start poses obstacles keep clear of; starts.front() is the default.
  std::vector<Pose> starts;
  std::uint64_t seed = 0;

  const Pose& start() const { return starts.front(); }
};

// The ten sensor bearings (radians, counter-clockwise from the heading).
// Bearing k mirrors bearing 9 - k.
std::array<double, kSensorCount> default_sensor_bearings();

struct RobotBody {
  double body_radius = 0.3;
  double wheel_base = 0.5;
  double wheel_radius = 0.1;
  double nominal_clearance = 1.0;
  double sensor_range = 1.5;
  double omega_max = 10.0;  // wheel angular speed at |command| = 1, rad/s
  double slope_gain = 1.0;
  std::array<double, kSensorCount> sensor_bearings = default_sensor_bearings();

  bool valid() const;
};

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double wheel_angle_left = 0.0;  // cumulative |rotation|, rad
  double wheel_angle_right = 0.0;
  double clearance = 1.0;
  bool contact = false;
  double rate_left = 0.0;  // wheel angular velocity of the last step, rad/s
  double rate_right = 0.0;
  bool operator==(const RobotState&) const = default;
};

RobotState initial_state(const World& world, const RobotBody& body, const Pose& pose);

struct SensorReading {
  std::array<double, kSensorCount> proximity{};
  bool touch = false;
  double rotation_rate_left = 0.0;
  double rotation_rate_right = 0.0;
  bool operator==(const SensorReading&) const = default;
};

struct StepConfig {
  double coarseness = 0.5;
  double dt_min = 0.05;
  double dt_max = 0.15;
  double t_start = 0.0;
  double t_finish = 100.0;

  double dt() const { return dt_min + coarseness * (dt_max - dt_min); }
  // Number of steps covering [t_start, t_finish].
  int steps() const;
  bool valid() const;
};

struct MotorCommand {
  double left = 0.0;
  double right = 0.0;
  bool operator==(const MotorCommand&) const = default;
};

// Physical modifiers on top of the nominal body: per-wheel motor gains,
// translation and turn-rate scaling, clearance scaling.
struct Actuation {
  double gain_left = 1.0;
  double gain_right = 1.0;
  double speed_scale = 1.0;
  double turn_scale = 1.0;
  double clearance_scale = 1.0;
  bool operator==(const Actuation&) const = default;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorldConfig {
  TerrainKind terrain = TerrainKind::kFlat;
  int obstacles = 0;
  std::uint64_t seed = 1;
  double amplitude = 0.3;
  double cell_size = 0.25;
  Bounds bounds;
  Target target;
  double obstacle_radius_min = 0.3;
  double obstacle_radius_max = 0.6;
  double gravity = kStandardGravity;
  // Starting corner inset, in body radii.
  double corner_inset = 2.0;

  bool operator==(const WorldConfig&) const = default;
};

World make_world(const WorldConfig& cfg, const RobotBody& body = {});
World make_world(TerrainKind kind, int obstacles, std::uint64_t seed);

// The four bounds corners inset by inset·body_radius, each facing the target.
std::vector<Pose> corner_starts(const Bounds& bounds, const Target& target, double inset);

// Obstacle or bounds overlap of a body centred at (x, y).
bool collides(const World& world, const RobotBody& body, double x, double y);

// Max minus min terrain height over the body footprint (centre and four rim points).
double terrain_roughness(const World& world, const RobotBody& body, double x, double y, double heading);

RobotState step(const World& world, const RobotBody& body, const RobotState& state, MotorCommand motor,
                const StepConfig& cfg, const Actuation& actuation = {});

SensorReading sense(const World& world, const RobotBody& body, const RobotState& state);

// Distance from the body edge along `bearing` to the nearest obstacle or wall.
double ray_distance(const World& world, const RobotBody& body, const RobotState& state, double bearing);

bool reached_target(const World& world, const RobotBody& body, const RobotState& state);

// Gap between the body edge and the target disc; 0 once the target is reached.
double target_gap(const World& world, const RobotBody& body, double x, double y);

struct TrajectorySample {
  double t = 0.0;
  RobotState state;
  MotorCommand motor;  // network command issued this step
  SensorReading reading;
  bool operator==(const TrajectorySample&) const = default;
};

using Trajectory = std::vector<TrajectorySample>;

// Columns: t,x,y,heading,clearance,motor_l,motor_r,s0..s9,rot_l,rot_r,touch
void write_trajectory_csv(std::ostream& out, std::span<const TrajectorySample> samples);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace evobot
