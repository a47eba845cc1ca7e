#pragma once

// Stick-genotype grammar: parsing into body plans, canonical serialization and
// grammar-closed genetic operators.
//
// Grammar summary (a documented subset of the Framsticks f1 notation):
//   X              append a stick (one new part + one joint) to the current part
//   ( b1 , b2 ...) branch group; every branch grows from the current part and
//                  the group terminates the enclosing sequence
//   r l m s i e    modifier letters (lowercase = x1/1.1, uppercase = x1.1) that
//                  apply to the next stick only
//   [ ... ]        neuron attached to the end part of the stick it follows;
//                  `T` touch, `|` motor, no letter = hidden, then either a
//                  single `:w` bias entry or `offset:weight` connection entries

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evobot {

class GenotypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Position is 1-based, counted in characters of the genotype text.
class SyntaxError : public GenotypeError {
 public:
  SyntaxError(std::size_t position, std::string expected);
  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class SemanticError : public GenotypeError {
 public:
  SemanticError(std::size_t position, std::string message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

struct Genotype {
  std::string text;
  bool operator==(const Genotype&) const = default;
};

// Modifier properties in canonical serialization order.
enum class Modifier : int { kRotation = 0, kLength, kMuscle, kSize, kStiffness, kFriction };
inline constexpr int kModifierCount = 6;
inline constexpr double kModifierStep = 1.1;
inline constexpr double kModifierMin = 0.2;
inline constexpr double kModifierMax = 5.0;

// Net modifier letter counts (uppercase +1, lowercase -1) for one stick.
using ModifierCounts = std::array<int, kModifierCount>;

// 1.1^count clamped to [0.2, 5.0].
double modifier_factor(int count);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct Part {
  int id = 0;
  Vec3 position;
  double size_modifier = 1.0;
  double friction_modifier = 1.0;
  bool operator==(const Part&) const = default;
};

struct Joint {
  int id = 0;
  int part_a = 0;  // parent
  int part_b = 0;  // child, the stick's end part
  double stiffness = 0.5;
  double rest_angle = 0.0;
  double length = 1.0;
  double muscle_strength = 1.0;
  ModifierCounts modifiers{};
  // Slot within the branch group this stick starts (0 of 1 when inline).
  int branch_slot = 0;
  int branch_count = 1;
  bool operator==(const Joint&) const = default;
};

enum class NeuronKind { kTouch, kMotor, kHidden };

struct NeuronSpec {
  int id = 0;
  NeuronKind kind = NeuronKind::kHidden;
  int attachment = 0;  // part id
  // Bias form `[T:w]` stores {w}; connection form stores nothing here.
  std::vector<double> params;
  bool operator==(const NeuronSpec&) const = default;
};

struct Connection {
  int from = 0;
  int to = 0;
  double weight = 0.0;
  bool operator==(const Connection&) const = default;
};

struct BodyPlan {
  std::vector<Part> parts;
  std::vector<Joint> joints;
  std::vector<NeuronSpec> neurons;
  std::vector<Connection> connections;

  bool operator==(const BodyPlan&) const = default;

  int count_neurons(NeuronKind kind) const;
  // parts == joints + 1, tree connectivity, valid references.
  bool satisfies_invariants() const;
};

// Structural equality: tree shape, per-stick modifiers, neurons and
// connections. Geometry follows from these, so this is the isomorphism used
// by the round-trip property.
bool isomorphic(const BodyPlan& a, const BodyPlan& b);

BodyPlan parse(const Genotype& g);
Genotype serialize(const BodyPlan& bp);

struct MutationRates {
  double point_change = 0.3;
  double segment_insert = 0.1;
  double segment_delete = 0.1;
  double weight_perturb = 0.2;
  double weight_sigma = 0.3;

  static MutationRates none() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
};

Genotype mutate(const Genotype& g, const MutationRates& rates, std::uint64_t rng_seed);
Genotype crossover(const Genotype& a, const Genotype& b, std::uint64_t rng_seed);

// Number of `X` symbols, i.e. the joint count of the parsed plan.
int stick_count(std::string_view text);

// Genotype files: one genotype per line, `#` starts a comment, blank lines skipped.
struct GenotypeLine {
  int line_number = 0;
  Genotype genotype;
};
std::vector<GenotypeLine> read_genotype_lines(std::string_view content);

// The Khepera genotype used throughout the examples and tests.
inline constexpr std::string_view kKheperaGenotype =
    "(rrX(IX(ISSSEEX[T:1]),lmXMMMMEEEX[|1:2,-1:-3]rrSEEX[T:-0.407]"
    "(SSISSLIEEX,,SSISSLIEEX),))";

}  // namespace evobot
