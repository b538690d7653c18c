#include <sstream>

#include "sarplan/pddl/model.hpp"

namespace sarplan::pddl {

std::string format_atom(const Atom& atom) {
  std::string out = "(" + atom.predicate;
  for (const auto& a : atom.args) out += " " + a;
  return out + ")";
}

std::string format_literal(const Literal& lit) {
  return lit.negated ? "(not " + format_atom(lit.atom) + ")" : format_atom(lit.atom);
}

namespace {

std::string typed(const std::vector<TypedName>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += " ";
    out += names[i].name + " - " + names[i].type;
  }
  return out;
}

std::string conjunction(const std::vector<Literal>& lits, const std::string& indent) {
  if (lits.empty()) return "(and)";
  std::string out = "(and";
  for (const auto& l : lits) out += "\n" + indent + format_literal(l);
  return out + ")";
}

}  // namespace

std::string print_domain(const DomainModel& d) {
  std::ostringstream os;
  os << "(define (domain " << d.name << ")\n";
  if (!d.requirements.empty()) {
    os << "  (:requirements";
    for (const auto& r : d.requirements) os << " " << r;
    os << ")\n";
  }
  if (!d.types.empty()) {
    os << "  (:types";
    for (const auto& t : d.types) os << "\n    " << t.name << " - " << t.parent;
    os << ")\n";
  }
  if (!d.constants.empty()) os << "  (:constants " << typed(d.constants) << ")\n";
  if (!d.predicates.empty()) {
    os << "  (:predicates";
    for (const auto& p : d.predicates) {
      os << "\n    (" << p.name;
      if (!p.params.empty()) os << " " << typed(p.params);
      os << ")";
    }
    os << ")\n";
  }
  for (const auto& a : d.actions) {
    os << "  ;; @group: " << to_string(a.group) << "\n";
    os << "  (:action " << a.name << "\n";
    os << "    :parameters (" << typed(a.params) << ")\n";
    os << "    :precondition " << conjunction(a.precondition, "      ") << "\n";
    os << "    :effect ";
    if (a.outcomes.size() == 1) {
      os << conjunction(a.outcomes.front(), "      ");
    } else {
      os << "(oneof";
      for (const auto& o : a.outcomes) os << "\n      " << conjunction(o, "        ");
      os << ")";
    }
    os << ")\n";
  }
  os << ")\n";
  return os.str();
}

std::string print_problem(const ProblemModel& p) {
  std::ostringstream os;
  os << "(define (problem " << p.name << ")\n";
  os << "  (:domain " << p.domain_name << ")\n";
  if (!p.objects.empty()) os << "  (:objects " << typed(p.objects) << ")\n";
  os << "  (:init";
  for (const auto& a : p.init) os << "\n    " << format_atom(a);
  os << ")\n";
  os << "  (:goal " << conjunction(p.goal, "    ") << "))\n";
  return os.str();
}

}  // namespace sarplan::pddl
