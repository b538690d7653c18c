#include <algorithm>
#include <functional>
#include <map>

#include "sarplan/pddl/task.hpp"

namespace sarplan {

using pddl::DomainModel;
using pddl::ProblemModel;

std::string GroundAction::name() const {
  std::string out = "(" + schema;
  for (const auto& a : args) out += " " + a;
  return out + ")";
}

std::optional<FluentId> GroundedTask::find_fluent(std::string_view name) const {
  auto it = std::find(fluents.begin(), fluents.end(), name);
  if (it == fluents.end()) return std::nullopt;
  return static_cast<FluentId>(it - fluents.begin());
}

std::optional<ActionId> GroundedTask::find_action(std::string_view name) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].name() == name) return static_cast<ActionId>(i);
  }
  return std::nullopt;
}

std::string GroundedTask::format(const FluentLiteral& lit) const {
  const auto& n = fluents.at(lit.fluent);
  return lit.value ? n : "(not " + n + ")";
}

namespace {

// Object universe, per-type compatible lists and fluent index arithmetic
// shared by the parallel and serial grounders.
class GroundingContext {
 public:
  GroundingContext(const DomainModel& d, const ProblemModel& p) : domain_(d), problem_(p) {
    if (p.domain_name != d.name) {
      throw pddl::MismatchedDomain("problem '" + p.name + "' is for domain '" + p.domain_name +
                                   "', not '" + d.name + "'");
    }
    for (const auto& c : d.constants) add_object(c);
    for (const auto& o : p.objects) add_object(o);

    std::size_t offset = 0;
    for (const auto& pred : d.predicates) {
      PredicateLayout layout;
      layout.offset = offset;
      layout.count = 1;
      for (const auto& param : pred.params) {
        const auto& dom = compatible(param.type);
        std::vector<int> position(objects_.size(), -1);
        for (std::size_t k = 0; k < dom.size(); ++k) position[dom[k]] = static_cast<int>(k);
        layout.domains.push_back(&dom);
        layout.position.push_back(std::move(position));
        layout.count *= dom.size();
      }
      offset += layout.count;
      layouts_.emplace(pred.name, std::move(layout));
    }
    num_fluents_ = offset;
  }

  std::size_t num_fluents() const { return num_fluents_; }

  const std::vector<std::size_t>& compatible(const std::string& type) {
    auto it = compatible_.find(type);
    if (it != compatible_.end()) return it->second;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if (domain_.is_subtype(object_types_[i], type)) out.push_back(i);
    }
    return compatible_.emplace(type, std::move(out)).first->second;
  }

  const std::vector<std::string>& objects() const { return objects_; }
  std::size_t object_index(const std::string& name) const { return object_index_.at(name); }

  /// Fluent universe names in index order.
  std::vector<std::string> fluent_names(bool parallel) const {
    std::vector<std::string> names(num_fluents_);
    for (const auto& pred : domain_.predicates) {
      const auto& layout = layouts_.at(pred.name);
      const auto count = static_cast<long long>(layout.count);
#pragma omp parallel for schedule(static) if (parallel)
      for (long long idx = 0; idx < count; ++idx) {
        std::vector<std::size_t> tuple(layout.domains.size());
        auto rest = static_cast<std::size_t>(idx);
        for (std::size_t k = layout.domains.size(); k-- > 0;) {
          tuple[k] = (*layout.domains[k])[rest % layout.domains[k]->size()];
          rest /= layout.domains[k]->size();
        }
        std::string n = "(" + pred.name;
        for (auto o : tuple) n += " " + objects_[o];
        names[layout.offset + static_cast<std::size_t>(idx)] = n + ")";
      }
    }
    return names;
  }

  FluentId fluent_of(const std::string& predicate, const std::vector<std::size_t>& args) const {
    const auto& layout = layouts_.at(predicate);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < args.size(); ++k) {
      const int pos = layout.position[k][args[k]];
      idx = idx * layout.domains[k]->size() + static_cast<std::size_t>(pos);
    }
    return static_cast<FluentId>(layout.offset + idx);
  }

  FluentLiteral ground_literal(const pddl::Literal& lit, const pddl::ActionSchema& schema,
                               const std::vector<std::size_t>& binding) const {
    std::vector<std::size_t> args;
    args.reserve(lit.atom.args.size());
    for (const auto& a : lit.atom.args) {
      if (!a.empty() && a.front() == '?') {
        auto it = std::find_if(schema.params.begin(), schema.params.end(),
                               [&](const auto& p) { return p.name == a; });
        args.push_back(binding[static_cast<std::size_t>(it - schema.params.begin())]);
      } else {
        args.push_back(object_index_.at(a));
      }
    }
    return {fluent_of(lit.atom.predicate, args), !lit.negated};
  }

  GroundAction instantiate(const pddl::ActionSchema& schema, const std::vector<std::size_t>& binding) const {
    GroundAction g;
    g.schema = schema.name;
    g.group = schema.group;
    for (auto o : binding) g.args.push_back(objects_[o]);
    for (const auto& l : schema.precondition) g.pre.push_back(ground_literal(l, schema, binding));
    std::sort(g.pre.begin(), g.pre.end());
    g.pre.erase(std::unique(g.pre.begin(), g.pre.end()), g.pre.end());
    for (const auto& outcome : schema.outcomes) {
      std::map<FluentId, bool> eff;
      for (const auto& l : outcome) {
        auto lit = ground_literal(l, schema, binding);
        auto [it, inserted] = eff.emplace(lit.fluent, lit.value);
        if (!inserted) it->second = it->second || lit.value;  // add wins over delete
      }
      std::vector<FluentLiteral> lits;
      for (auto [f, v] : eff) lits.push_back({f, v});
      g.outcomes.push_back(std::move(lits));
    }
    return g;
  }

  State initial_state() const {
    State s(num_fluents_);
    for (const auto& atom : problem_.init) {
      std::vector<std::size_t> args;
      for (const auto& a : atom.args) args.push_back(object_index_.at(a));
      s.set(fluent_of(atom.predicate, args), true);
    }
    return s;
  }

  std::vector<FluentLiteral> goal() const {
    std::vector<FluentLiteral> out;
    for (const auto& l : problem_.goal) {
      std::vector<std::size_t> args;
      for (const auto& a : l.atom.args) args.push_back(object_index_.at(a));
      out.push_back({fluent_of(l.atom.predicate, args), !l.negated});
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  struct PredicateLayout {
    std::size_t offset = 0;
    std::size_t count = 1;
    std::vector<const std::vector<std::size_t>*> domains;
    std::vector<std::vector<int>> position;
  };

  void add_object(const pddl::TypedName& o) {
    object_index_.emplace(o.name, objects_.size());
    objects_.push_back(o.name);
    object_types_.push_back(o.type);
  }

  const DomainModel& domain_;
  const ProblemModel& problem_;
  std::vector<std::string> objects_;
  std::vector<std::string> object_types_;
  std::map<std::string, std::size_t> object_index_;
  std::map<std::string, std::vector<std::size_t>> compatible_;
  std::map<std::string, PredicateLayout> layouts_;
  std::size_t num_fluents_ = 0;
};

GroundedTask skeleton(GroundingContext& ctx, bool parallel) {
  GroundedTask t;
  t.fluents = ctx.fluent_names(parallel);
  t.init = ctx.initial_state();
  t.goal = ctx.goal();
  return t;
}

}  // namespace

GroundedTask ground(const DomainModel& domain, const ProblemModel& problem) {
  GroundingContext ctx(domain, problem);
  GroundedTask task = skeleton(ctx, true);

  std::vector<std::vector<const std::vector<std::size_t>*>> domains;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& schema : domain.actions) {
    std::vector<const std::vector<std::size_t>*> ds;
    std::size_t count = 1;
    for (const auto& p : schema.params) {
      ds.push_back(&ctx.compatible(p.type));
      count *= ds.back()->size();
    }
    domains.push_back(std::move(ds));
    offsets.push_back(total);
    total += count;
  }
  offsets.push_back(total);

  task.actions.resize(total);
  for (std::size_t s = 0; s < domain.actions.size(); ++s) {
    const auto& schema = domain.actions[s];
    const auto& ds = domains[s];
    const auto count = static_cast<long long>(offsets[s + 1] - offsets[s]);
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < count; ++idx) {
      // Mixed-radix decode, last parameter varies fastest.
      std::vector<std::size_t> binding(ds.size());
      auto rest = static_cast<std::size_t>(idx);
      for (std::size_t k = ds.size(); k-- > 0;) {
        binding[k] = (*ds[k])[rest % ds[k]->size()];
        rest /= ds[k]->size();
      }
      task.actions[offsets[s] + static_cast<std::size_t>(idx)] = ctx.instantiate(schema, binding);
    }
  }
  return task;
}

GroundedTask ground_serial(const DomainModel& domain, const ProblemModel& problem) {
  GroundingContext ctx(domain, problem);
  GroundedTask task = skeleton(ctx, false);
  for (const auto& schema : domain.actions) {
    std::vector<std::size_t> binding;
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
      if (k == schema.params.size()) {
        task.actions.push_back(ctx.instantiate(schema, binding));
        return;
      }
      for (auto o : ctx.compatible(schema.params[k].type)) {
        binding.push_back(o);
        rec(k + 1);
        binding.pop_back();
      }
    };
    rec(0);
  }
  return task;
}

GroundedTask load_task(std::string_view domain_text, std::string_view problem_text) {
  auto domain = pddl::parse_domain(domain_text);
  auto problem = pddl::parse_problem(problem_text, domain);
  return ground(domain, problem);
}

}  // namespace sarplan
