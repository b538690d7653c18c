#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sarplan::pddl {

struct SourcePos {
  int line = 0;
  int column = 0;

  // Positions are diagnostic only; they never take part in structural equality.
  friend bool operator==(const SourcePos&, const SourcePos&) { return true; }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, SourcePos pos) : std::runtime_error(what), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

/// Malformed token stream. The message carries line:column and the expected tokens.
class SyntaxError : public ParseError {
 public:
  SyntaxError(SourcePos pos, std::string found, std::vector<std::string> expected);
  const std::vector<std::string>& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::string found_;
  std::vector<std::string> expected_;
};

/// Well-formed text that violates the model: undeclared type/predicate, arity
/// mismatch, unbound variable, unsupported construct.
class SemanticError : public ParseError {
 public:
  SemanticError(SourcePos pos, const std::string& message);
};

class MismatchedDomain : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActionGroup { RobotBehaviour, ProcedureUpdate, ImplicitSignal, ExplicitQuery };

inline constexpr ActionGroup kAllGroups[] = {ActionGroup::RobotBehaviour, ActionGroup::ProcedureUpdate,
                                             ActionGroup::ImplicitSignal, ActionGroup::ExplicitQuery};

std::string_view to_string(ActionGroup g);
std::optional<ActionGroup> parse_group(std::string_view s);

struct TypeDecl {
  std::string name;
  std::string parent;  // "object" for roots

  friend bool operator==(const TypeDecl&, const TypeDecl&) = default;
};

struct TypedName {
  std::string name;  // variables keep their leading '?'
  std::string type;

  friend bool operator==(const TypedName&, const TypedName&) = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<TypedName> params;
  SourcePos pos;

  friend bool operator==(const PredicateDecl&, const PredicateDecl&) = default;
};

struct Atom {
  std::string predicate;
  std::vector<std::string> args;  // variables ("?x") or constants
  SourcePos pos;

  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Literal {
  Atom atom;
  bool negated = false;

  friend bool operator==(const Literal&, const Literal&) = default;
};

using EffectSet = std::vector<Literal>;

struct ActionSchema {
  std::string name;
  std::vector<TypedName> params;
  std::vector<Literal> precondition;
  std::vector<EffectSet> outcomes;  // size 1 iff deterministic
  ActionGroup group = ActionGroup::RobotBehaviour;
  SourcePos pos;

  bool deterministic() const { return outcomes.size() == 1; }

  friend bool operator==(const ActionSchema&, const ActionSchema&) = default;
};

struct DomainModel {
  std::string name;
  std::vector<std::string> requirements;
  std::vector<TypeDecl> types;  // excludes the implicit root "object"
  std::vector<TypedName> constants;
  std::vector<PredicateDecl> predicates;
  std::vector<ActionSchema> actions;

  const PredicateDecl* find_predicate(std::string_view name) const;
  const ActionSchema* find_action(std::string_view name) const;
  bool has_type(std::string_view name) const;
  /// True when `type` equals `ancestor` or descends from it.
  bool is_subtype(std::string_view type, std::string_view ancestor) const;

  friend bool operator==(const DomainModel&, const DomainModel&) = default;
};

struct ProblemModel {
  std::string name;
  std::string domain_name;
  std::vector<TypedName> objects;
  std::vector<Atom> init;  // ground atoms, duplicates removed
  std::vector<Literal> goal;

  friend bool operator==(const ProblemModel&, const ProblemModel&) = default;
};

DomainModel parse_domain(std::string_view text);
/// Object types, init atoms and goal literals are checked against `domain`.
ProblemModel parse_problem(std::string_view text, const DomainModel& domain);

/// Canonical pretty-printed PDDL. Stable formatting: reparsing the output
/// yields a structurally identical model.
std::string print_domain(const DomainModel& domain);
std::string print_problem(const ProblemModel& problem);

std::string format_atom(const Atom& atom);
std::string format_literal(const Literal& lit);

}  // namespace sarplan::pddl
