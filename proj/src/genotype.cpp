#include "evobot/genotype.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <utility>

namespace evobot {

SyntaxError::SyntaxError(std::size_t position, std::string expected)
    : GenotypeError("syntax error at position " + std::to_string(position) +
                    ": expected " + expected),
      position_(position),
      expected_(std::move(expected)) {}

SemanticError::SemanticError(std::size_t position, std::string message)
    : GenotypeError("semantic error at position " + std::to_string(position) + ": " + message),
      position_(position) {}

double modifier_factor(int count) {
  return std::clamp(std::pow(kModifierStep, count), kModifierMin, kModifierMax);
}

namespace {

constexpr std::string_view kModifierLetters = "rlmsie";

std::optional<std::pair<int, int>> modifier_of(char c) {
  for (std::size_t k = 0; k < kModifierLetters.size(); ++k) {
    if (c == kModifierLetters[k]) return std::pair<int, int>{static_cast<int>(k), -1};
    if (c == kModifierLetters[k] - 'a' + 'A') return std::pair<int, int>{static_cast<int>(k), +1};
  }
  return std::nullopt;
}

bool is_modifier(char c) { return modifier_of(c).has_value(); }

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double branch_offset(int slot, int count) {
  if (count <= 1) return 0.0;
  return -std::numbers::pi / 2.0 + std::numbers::pi * (slot + 0.5) / count;
}

// Recursive-descent parser over the raw text.
class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  BodyPlan run() {
    if (s_.empty()) throw SyntaxError(1, "'X' or '('");
    bp_.parts.push_back(Part{0, {}, 1.0, 1.0});
    direction_.push_back(0.0);
    sequence(0, /*top=*/true);
    if (pos_ != s_.size()) throw SyntaxError(pos_ + 1, "end of genotype");
    if (bp_.joints.empty()) throw SyntaxError(s_.size() + 1, "at least one 'X'");
    resolve_connections();
    return std::move(bp_);
  }

 private:
  struct PendingEntry {
    int neuron;
    int offset;
    double weight;
    std::size_t position;
  };

  std::optional<char> peek() const {
    if (pos_ < s_.size()) return s_[pos_];
    return std::nullopt;
  }

  bool at_sequence_end(bool top) const {
    auto c = peek();
    if (!c) return true;
    return !top && (*c == ',' || *c == ')');
  }

  void sequence(int part, bool top, int slot = 0, int count = 1) {
    bool first = true;
    while (!at_sequence_end(top)) {
      char c = *peek();
      if (c == '(') {
        if (first && !top) throw SyntaxError(pos_ + 1, "modifier or 'X'");
        group(part);
        if (!at_sequence_end(top)) {
          throw SyntaxError(pos_ + 1, top ? "end of genotype" : "',' or ')'");
        }
        return;
      }
      if (c == 'X' || is_modifier(c)) {
        part = stick(part, first ? slot : 0, first ? count : 1);
        first = false;
        while (peek() == '[') neuron(part);
        continue;
      }
      if (c == ')' || c == ',') throw SyntaxError(pos_ + 1, "modifier, 'X', '(' or end of genotype");
      if (c == ']') throw SyntaxError(pos_ + 1, "modifier, 'X' or '('");
      if (c == '[') throw SyntaxError(pos_ + 1, "'X' before neuron");
      throw SyntaxError(pos_ + 1, "modifier, 'X', '(', ',' or ')'");
    }
  }

  void group(int part) {
    ++pos_;  // '('
    // Branch count is known only after scanning the group, so collect ranges.
    std::vector<std::size_t> starts = {pos_};
    int depth = 0;
    std::size_t scan = pos_;
    for (;; ++scan) {
      if (scan >= s_.size()) throw SyntaxError(s_.size() + 1, "')'");
      char c = s_[scan];
      if (c == '(') ++depth;
      if (c == '[') {
        auto close = s_.find(']', scan);
        if (close == std::string_view::npos) throw SyntaxError(s_.size() + 1, "']'");
        scan = close;
        continue;
      }
      if (c == ')') {
        if (depth == 0) break;
        --depth;
      }
      if (c == ',' && depth == 0) starts.push_back(scan + 1);
    }
    const int count = static_cast<int>(starts.size());
    for (int b = 0; b < count; ++b) {
      sequence(part, /*top=*/false, b, count);
      if (b + 1 < count) {
        if (peek() != ',') throw SyntaxError(pos_ + 1, "','");
        ++pos_;
      }
    }
    if (peek() != ')') throw SyntaxError(pos_ + 1, "')'");
    ++pos_;
  }

  int stick(int parent, int slot, int count) {
    ModifierCounts mods{};
    while (auto c = peek()) {
      if (*c == 'X') break;
      auto m = modifier_of(*c);
      if (!m) throw SyntaxError(pos_ + 1, "modifier or 'X'");
      mods[m->first] += m->second;
      ++pos_;
    }
    if (!peek()) throw SyntaxError(pos_ + 1, "'X' after modifier");
    ++pos_;  // 'X'

    const int child = static_cast<int>(bp_.parts.size());
    const double rotation = modifier_factor(mods[static_cast<int>(Modifier::kRotation)]);
    const double rest_angle = branch_offset(slot, count) + (rotation - 1.0) * std::numbers::pi / 4.0;
    const double length = modifier_factor(mods[static_cast<int>(Modifier::kLength)]);
    const double dir = direction_[parent] + rest_angle;
    const Vec3& origin = bp_.parts[parent].position;

    Part p;
    p.id = child;
    p.position = {origin.x + length * std::cos(dir), origin.y + length * std::sin(dir), 0.0};
    p.size_modifier = modifier_factor(mods[static_cast<int>(Modifier::kSize)]);
    p.friction_modifier = modifier_factor(mods[static_cast<int>(Modifier::kFriction)]);
    bp_.parts.push_back(p);
    direction_.push_back(dir);

    Joint j;
    j.id = static_cast<int>(bp_.joints.size());
    j.part_a = parent;
    j.part_b = child;
    j.stiffness = std::clamp(0.5 * modifier_factor(mods[static_cast<int>(Modifier::kStiffness)]), 0.0, 1.0);
    j.rest_angle = rest_angle;
    j.length = length;
    j.muscle_strength = modifier_factor(mods[static_cast<int>(Modifier::kMuscle)]);
    j.modifiers = mods;
    j.branch_slot = slot;
    j.branch_count = count;
    bp_.joints.push_back(j);
    return child;
  }

  // Reads a number made of [0-9+-.eE]; `integer` rejects fractional forms.
  double number(bool integer, const char* what) {
    const std::size_t start = pos_;
    while (auto c = peek()) {
      if (std::isdigit(static_cast<unsigned char>(*c)) || *c == '-' || *c == '+' ||
          (!integer && (*c == '.' || *c == 'e' || *c == 'E'))) {
        ++pos_;
      } else {
        break;
      }
    }
    std::string_view token = s_.substr(start, pos_ - start);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || res.ec != std::errc() || res.ptr != token.data() + token.size() ||
        !std::isfinite(value)) {
      throw SyntaxError(start + 1, what);
    }
    return value;
  }

  void neuron(int part) {
    ++pos_;  // '['
    NeuronSpec n;
    n.id = static_cast<int>(bp_.neurons.size());
    n.attachment = part;
    if (peek() == 'T') {
      n.kind = NeuronKind::kTouch;
      ++pos_;
    } else if (peek() == '|') {
      n.kind = NeuronKind::kMotor;
      ++pos_;
    }
    if (peek() == ':') {
      ++pos_;
      n.params.push_back(number(false, "bias weight"));
    } else if (peek() != ']') {
      for (;;) {
        const std::size_t at = pos_ + 1;
        const double offset = number(true, "integer connection offset");
        if (peek() != ':') throw SyntaxError(pos_ + 1, "':'");
        ++pos_;
        const double weight = number(false, "connection weight");
        pending_.push_back({n.id, static_cast<int>(offset), weight, at});
        if (peek() != ',') break;
        ++pos_;
      }
    }
    if (peek() != ']') throw SyntaxError(pos_ + 1, "']'");
    ++pos_;
    bp_.neurons.push_back(std::move(n));
  }

  void resolve_connections() {
    const int n = static_cast<int>(bp_.neurons.size());
    for (const auto& e : pending_) {
      const int from = e.neuron + e.offset;
      if (from < 0 || from >= n) {
        throw SemanticError(e.position, "connection offset " + std::to_string(e.offset) +
                                            " from neuron " + std::to_string(e.neuron) +
                                            " references a nonexistent neuron");
      }
      bp_.connections.push_back({from, e.neuron, e.weight});
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  BodyPlan bp_;
  std::vector<double> direction_;
  std::vector<PendingEntry> pending_;
};

void emit_modifiers(const ModifierCounts& mods, std::string& out) {
  for (int k = 0; k < kModifierCount; ++k) {
    const char lower = kModifierLetters[k];
    const char letter = mods[k] > 0 ? static_cast<char>(lower - 'a' + 'A') : lower;
    out.append(static_cast<std::size_t>(std::abs(mods[k])), letter);
  }
}

class Serializer {
 public:
  explicit Serializer(const BodyPlan& bp) : bp_(bp), children_(bp.parts.size()) {
    for (const auto& j : bp.joints) children_[j.part_a].push_back(&j);
    for (const auto& n : bp.neurons) neurons_by_part_[n.attachment].push_back(&n);
  }

  std::string run() {
    std::string out;
    subtree(0, out);
    return out;
  }

 private:
  void stick(const Joint& j, std::string& out) {
    emit_modifiers(j.modifiers, out);
    out += 'X';
    if (auto it = neurons_by_part_.find(j.part_b); it != neurons_by_part_.end()) {
      for (const NeuronSpec* n : it->second) neuron(*n, out);
    }
    subtree(j.part_b, out);
  }

  void neuron(const NeuronSpec& n, std::string& out) {
    out += '[';
    if (n.kind == NeuronKind::kTouch) out += 'T';
    if (n.kind == NeuronKind::kMotor) out += '|';
    if (!n.params.empty()) {
      out += ':';
      out += format_number(n.params.front());
    } else {
      bool first = true;
      for (const auto& c : bp_.connections) {
        if (c.to != n.id) continue;
        if (!first) out += ',';
        first = false;
        out += std::to_string(c.from - c.to);
        out += ':';
        out += format_number(c.weight);
      }
    }
    out += ']';
  }

  void subtree(int part, std::string& out) {
    const auto& kids = children_[part];
    if (kids.empty()) return;
    if (kids.size() == 1 && kids.front()->branch_count == 1) {
      stick(*kids.front(), out);
      return;
    }
    int count = 0;
    for (const Joint* j : kids) count = std::max({count, j->branch_count, j->branch_slot + 1});
    count = std::max(count, static_cast<int>(kids.size()));
    std::vector<std::vector<const Joint*>> slots(count);
    int fallback = 0;
    for (const Joint* j : kids) {
      int s = j->branch_slot;
      if (s < 0 || s >= count || !slots[s].empty()) {
        while (!slots[fallback].empty()) ++fallback;
        s = fallback;
      }
      slots[s].push_back(j);
    }
    out += '(';
    for (int s = 0; s < count; ++s) {
      if (s > 0) out += ',';
      for (const Joint* j : slots[s]) stick(*j, out);
    }
    out += ')';
  }

  const BodyPlan& bp_;
  std::vector<std::vector<const Joint*>> children_;
  std::map<int, std::vector<const NeuronSpec*>> neurons_by_part_;
};

// ---- token-level view used by the genetic operators ----

enum class TokKind { kModifier, kStick, kOpen, kComma, kClose, kNeuron };

struct Token {
  TokKind kind;
  std::string text;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    switch (c) {
      case 'X': out.push_back({TokKind::kStick, "X"}); break;
      case '(': out.push_back({TokKind::kOpen, "("}); break;
      case ',': out.push_back({TokKind::kComma, ","}); break;
      case ')': out.push_back({TokKind::kClose, ")"}); break;
      case '[': {
        auto close = s.find(']', i);
        out.push_back({TokKind::kNeuron, std::string(s.substr(i, close - i + 1))});
        i = close;
        break;
      }
      default: out.push_back({TokKind::kModifier, std::string(1, c)}); break;
    }
  }
  return out;
}

std::string join(const std::vector<Token>& toks) {
  std::string out;
  for (const auto& t : toks) out += t.text;
  return out;
}

struct StickSpan {
  std::size_t begin;  // first modifier (or the X)
  std::size_t x;      // the X token
  std::size_t end;    // one past the last trailing neuron token
};

std::vector<StickSpan> stick_spans(const std::vector<Token>& toks) {
  std::vector<StickSpan> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != TokKind::kStick) continue;
    std::size_t b = i;
    while (b > 0 && toks[b - 1].kind == TokKind::kModifier) --b;
    std::size_t e = i + 1;
    while (e < toks.size() && toks[e].kind == TokKind::kNeuron) ++e;
    out.push_back({b, i, e});
  }
  return out;
}

// End of the sequence that contains token `from` (exclusive).
std::size_t sequence_end(const std::vector<Token>& toks, std::size_t from) {
  int depth = 0;
  for (std::size_t i = from; i < toks.size(); ++i) {
    switch (toks[i].kind) {
      case TokKind::kOpen: ++depth; break;
      case TokKind::kClose:
        if (depth == 0) return i;
        --depth;
        break;
      case TokKind::kComma:
        if (depth == 0) return i;
        break;
      default: break;
    }
  }
  return toks.size();
}

struct NeuronText {
  std::string type;  // "", "T" or "|"
  std::optional<double> bias;
  std::vector<std::pair<int, double>> entries;
};

NeuronText split_neuron(const std::string& tok) {
  NeuronText n;
  std::string_view body(tok);
  body.remove_prefix(1);
  body.remove_suffix(1);
  if (!body.empty() && (body.front() == 'T' || body.front() == '|')) {
    n.type = std::string(1, body.front());
    body.remove_prefix(1);
  }
  auto to_double = [](std::string_view v) {
    if (!v.empty() && v.front() == '+') v.remove_prefix(1);
    double d = 0.0;
    std::from_chars(v.data(), v.data() + v.size(), d);
    return d;
  };
  if (!body.empty() && body.front() == ':') {
    n.bias = to_double(body.substr(1));
    return n;
  }
  while (!body.empty()) {
    auto comma = body.find(',');
    std::string_view entry = body.substr(0, comma);
    auto colon = entry.find(':');
    n.entries.emplace_back(static_cast<int>(to_double(entry.substr(0, colon))),
                           to_double(entry.substr(colon + 1)));
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return n;
}

std::string join_neuron(const NeuronText& n) {
  std::string out = "[" + n.type;
  if (n.bias) {
    out += ":" + format_number(*n.bias);
  } else {
    for (std::size_t i = 0; i < n.entries.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(n.entries[i].first) + ":" + format_number(n.entries[i].second);
    }
  }
  return out + "]";
}

// Drops connection entries whose relative offset leaves the neuron range.
void repair_connections(std::vector<Token>& toks) {
  std::vector<std::size_t> neurons;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind == TokKind::kNeuron) neurons.push_back(i);
  }
  const int n = static_cast<int>(neurons.size());
  for (int k = 0; k < n; ++k) {
    NeuronText nt = split_neuron(toks[neurons[k]].text);
    const auto before = nt.entries.size();
    std::erase_if(nt.entries, [&](const auto& e) { return k + e.first < 0 || k + e.first >= n; });
    if (nt.entries.size() != before) toks[neurons[k]].text = join_neuron(nt);
  }
}

char random_modifier_letter(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 2 * kModifierCount - 1);
  const int v = pick(rng);
  const char lower = kModifierLetters[v / 2];
  return v % 2 ? static_cast<char>(lower - 'a' + 'A') : lower;
}

double round_weight(double w) { return std::round(w * 1e4) / 1e4; }

}  // namespace

int BodyPlan::count_neurons(NeuronKind kind) const {
  return static_cast<int>(std::count_if(neurons.begin(), neurons.end(),
                                        [kind](const NeuronSpec& n) { return n.kind == kind; }));
}

bool BodyPlan::satisfies_invariants() const {
  if (parts.size() != joints.size() + 1) return false;
  const int np = static_cast<int>(parts.size());
  std::vector<int> parent(np, -1);
  for (const auto& j : joints) {
    if (j.part_a < 0 || j.part_a >= np || j.part_b <= 0 || j.part_b >= np) return false;
    if (parent[j.part_b] != -1) return false;
    parent[j.part_b] = j.part_a;
  }
  // Every non-root part reaches the root.
  for (int p = 1; p < np; ++p) {
    int cur = p;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > np || parent[cur] < 0) return false;
      cur = parent[cur];
    }
  }
  const int nn = static_cast<int>(neurons.size());
  for (const auto& n : neurons) {
    if (n.attachment < 0 || n.attachment >= np) return false;
  }
  for (const auto& c : connections) {
    if (c.from < 0 || c.from >= nn || c.to < 0 || c.to >= nn) return false;
  }
  return true;
}

bool isomorphic(const BodyPlan& a, const BodyPlan& b) {
  if (a.parts.size() != b.parts.size() || a.joints.size() != b.joints.size() ||
      a.neurons.size() != b.neurons.size() || a.connections.size() != b.connections.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.joints.size(); ++i) {
    const Joint& x = a.joints[i];
    const Joint& y = b.joints[i];
    if (x.part_a != y.part_a || x.part_b != y.part_b || x.modifiers != y.modifiers ||
        x.branch_slot != y.branch_slot || x.branch_count != y.branch_count) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.neurons.size(); ++i) {
    if (a.neurons[i].kind != b.neurons[i].kind || a.neurons[i].attachment != b.neurons[i].attachment ||
        a.neurons[i].params != b.neurons[i].params) {
      return false;
    }
  }
  return a.connections == b.connections;
}

BodyPlan parse(const Genotype& g) { return Parser(g.text).run(); }

Genotype serialize(const BodyPlan& bp) { return {Serializer(bp).run()}; }

int stick_count(std::string_view text) {
  return static_cast<int>(std::count(text.begin(), text.end(), 'X'));
}

Genotype mutate(const Genotype& g, const MutationRates& rates, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  auto toks = tokenize(g.text);
  bool changed = false;

  if (unit(rng) < rates.point_change) {
    auto spans = stick_spans(toks);
    const StickSpan s = spans[pick(spans.size())];
    const std::size_t n_mods = s.x - s.begin;
    const char letter = random_modifier_letter(rng);
    if (n_mods > 0) {
      toks[s.begin + pick(n_mods)].text = std::string(1, letter);
    } else {
      toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(s.x),
                  Token{TokKind::kModifier, std::string(1, letter)});
    }
    changed = true;
  }

  if (unit(rng) < rates.segment_insert) {
    auto spans = stick_spans(toks);
    const StickSpan s = spans[pick(spans.size())];
    std::vector<Token> seg;
    if (unit(rng) < 0.5) seg.push_back({TokKind::kModifier, std::string(1, random_modifier_letter(rng))});
    seg.push_back({TokKind::kStick, "X"});
    toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(s.end), seg.begin(), seg.end());
    changed = true;
  }

  if (unit(rng) < rates.segment_delete) {
    auto spans = stick_spans(toks);
    std::vector<StickSpan> candidates;
    if (spans.size() > 1) {
      for (const auto& s : spans) {
        const bool has_neurons = s.end > s.x + 1;
        const bool opens_group = s.end < toks.size() && toks[s.end].kind == TokKind::kOpen;
        if (!has_neurons && !opens_group) candidates.push_back(s);
      }
    }
    if (!candidates.empty()) {
      const StickSpan s = candidates[pick(candidates.size())];
      toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(s.begin),
                 toks.begin() + static_cast<std::ptrdiff_t>(s.end));
      changed = true;
    }
  }

  if (unit(rng) < rates.weight_perturb) {
    std::normal_distribution<double> noise(0.0, rates.weight_sigma);
    for (auto& t : toks) {
      if (t.kind != TokKind::kNeuron) continue;
      NeuronText nt = split_neuron(t.text);
      if (nt.bias) nt.bias = round_weight(*nt.bias + noise(rng));
      for (auto& e : nt.entries) e.second = round_weight(e.second + noise(rng));
      t.text = join_neuron(nt);
    }
    changed = true;
  }

  if (!changed) return g;
  return {join(toks)};
}

Genotype crossover(const Genotype& a, const Genotype& b, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  auto pick = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  const auto ta = tokenize(a.text);
  const auto tb = tokenize(b.text);
  const auto sa = stick_spans(ta);
  const auto sb = stick_spans(tb);
  const StickSpan cut_a = sa[pick(sa.size())];
  const StickSpan cut_b = sb[pick(sb.size())];
  const std::size_t end_a = sequence_end(ta, cut_a.x + 1);
  const std::size_t end_b = sequence_end(tb, cut_b.x + 1);

  std::vector<Token> out(ta.begin(), ta.begin() + static_cast<std::ptrdiff_t>(cut_a.begin));
  out.insert(out.end(), tb.begin() + static_cast<std::ptrdiff_t>(cut_b.begin),
             tb.begin() + static_cast<std::ptrdiff_t>(end_b));
  out.insert(out.end(), ta.begin() + static_cast<std::ptrdiff_t>(end_a), ta.end());
  repair_connections(out);
  return {join(out)};
}

std::vector<GenotypeLine> read_genotype_lines(std::string_view content) {
  std::vector<GenotypeLine> out;
  int line_no = 0;
  while (!content.empty()) {
    ++line_no;
    auto nl = content.find('\n');
    std::string_view line = content.substr(0, nl);
    content = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (line.empty()) continue;
    out.push_back({line_no, Genotype{std::string(line)}});
  }
  return out;
}

}  // namespace evobot
