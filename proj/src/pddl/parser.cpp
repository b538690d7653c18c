#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "sarplan/pddl/model.hpp"

namespace sarplan::pddl {

namespace {

std::string at(SourcePos pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

SyntaxError::SyntaxError(SourcePos pos, std::string found, std::vector<std::string> expected)
    : ParseError(at(pos) + ": syntax error: found " + found + ", expected " + join(expected, " or "), pos),
      found_(std::move(found)),
      expected_(std::move(expected)) {}

SemanticError::SemanticError(SourcePos pos, const std::string& message)
    : ParseError(at(pos) + ": " + message, pos) {}

std::string_view to_string(ActionGroup g) {
  switch (g) {
    case ActionGroup::RobotBehaviour:
      return "robot-behaviour";
    case ActionGroup::ProcedureUpdate:
      return "procedure-update";
    case ActionGroup::ImplicitSignal:
      return "implicit-signal";
    case ActionGroup::ExplicitQuery:
      return "explicit-query";
  }
  return "robot-behaviour";
}

std::optional<ActionGroup> parse_group(std::string_view s) {
  for (auto g : kAllGroups) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

const PredicateDecl* DomainModel::find_predicate(std::string_view n) const {
  auto it = std::find_if(predicates.begin(), predicates.end(), [&](const auto& p) { return p.name == n; });
  return it == predicates.end() ? nullptr : &*it;
}

const ActionSchema* DomainModel::find_action(std::string_view n) const {
  auto it = std::find_if(actions.begin(), actions.end(), [&](const auto& a) { return a.name == n; });
  return it == actions.end() ? nullptr : &*it;
}

bool DomainModel::has_type(std::string_view n) const {
  if (n == "object") return true;
  return std::any_of(types.begin(), types.end(), [&](const auto& t) { return t.name == n; });
}

bool DomainModel::is_subtype(std::string_view type, std::string_view ancestor) const {
  std::string current(type);
  // Bounded walk; the parser rejects cyclic hierarchies.
  for (std::size_t steps = 0; steps <= types.size() + 1; ++steps) {
    if (current == ancestor) return true;
    if (current == "object") return false;
    auto it = std::find_if(types.begin(), types.end(), [&](const auto& t) { return t.name == current; });
    if (it == types.end()) return false;
    current = it->parent;
  }
  return false;
}

namespace {

enum class TokKind { LParen, RParen, Name, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  SourcePos pos;
  std::optional<std::string> group_note;  // from a preceding ";; @group:" comment
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::optional<std::string> note;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == ';') {
      auto end = text.find('\n', i);
      if (end == std::string_view::npos) end = text.size();
      std::string_view body = text.substr(i, end - i);
      body.remove_prefix(std::min(body.find_first_not_of(';'), body.size()));
      std::string content = trim(body);
      if (content.rfind("@group:", 0) == 0) note = lower(trim(std::string_view(content).substr(7)));
      advance(end - i);
      continue;
    }
    Token tok;
    tok.pos = {line, col};
    tok.group_note = std::exchange(note, std::nullopt);
    if (c == '(' || c == ')') {
      tok.kind = c == '(' ? TokKind::LParen : TokKind::RParen;
      tok.text = std::string(1, c);
      advance(1);
    } else {
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != '(' &&
             text[j] != ')' && text[j] != ';') {
        ++j;
      }
      tok.kind = TokKind::Name;
      tok.text = lower(text.substr(i, j - i));
      advance(j - i);
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = TokKind::End;
  end.pos = {line, col};
  out.push_back(end);
  return out;
}

std::string describe(const Token& t) {
  switch (t.kind) {
    case TokKind::LParen:
      return "'('";
    case TokKind::RParen:
      return "')'";
    case TokKind::End:
      return "end of input";
    case TokKind::Name:
      return "'" + t.text + "'";
  }
  return "?";
}

bool is_variable(std::string_view s) { return !s.empty() && s.front() == '?'; }

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  DomainModel domain() {
    DomainModel d;
    lparen();
    keyword("define");
    lparen();
    keyword("domain");
    d.name = name("domain name");
    rparen();
    while (peek().kind == TokKind::LParen) {
      const Token& open = next();
      const Token& head = peek();
      const SourcePos pos = head.pos;
      const std::string section = name(":requirements, :types, :constants, :predicates or :action");
      if (section == ":requirements") {
        while (peek().kind == TokKind::Name) d.requirements.push_back(next().text);
        rparen();
      } else if (section == ":types") {
        for (auto& tn : typed_list(false)) d.types.push_back({tn.name, tn.type});
        rparen();
      } else if (section == ":constants") {
        auto cs = typed_list(false);
        d.constants.insert(d.constants.end(), cs.begin(), cs.end());
        rparen();
      } else if (section == ":predicates") {
        while (peek().kind == TokKind::LParen) {
          next();
          PredicateDecl p;
          p.pos = peek().pos;
          p.name = name("predicate name");
          p.params = typed_list(true);
          rparen();
          d.predicates.push_back(std::move(p));
        }
        rparen();
      } else if (section == ":action") {
        ActionSchema a = action(open.group_note, pos);
        d.actions.push_back(std::move(a));
      } else {
        throw SemanticError(pos, "unsupported domain section '" + section + "'");
      }
    }
    rparen();
    expect_end();
    validate(d);
    return d;
  }

  ProblemModel problem(const DomainModel& dom) {
    ProblemModel p;
    lparen();
    keyword("define");
    lparen();
    keyword("problem");
    p.name = name("problem name");
    rparen();
    std::set<std::string> seen_init;
    while (peek().kind == TokKind::LParen) {
      next();
      const SourcePos pos = peek().pos;
      const std::string section = name(":domain, :objects, :init or :goal");
      if (section == ":domain") {
        p.domain_name = name("domain name");
        rparen();
      } else if (section == ":objects") {
        auto os = typed_list(false);
        p.objects.insert(p.objects.end(), os.begin(), os.end());
        rparen();
      } else if (section == ":init") {
        while (peek().kind == TokKind::LParen) {
          const SourcePos lp = peek().pos;
          Literal l = literal();
          if (l.negated) throw SemanticError(lp, "negative literal in :init (closed-world initial state)");
          if (seen_init.insert(format_atom(l.atom)).second) p.init.push_back(std::move(l.atom));
        }
        rparen();
      } else if (section == ":goal") {
        p.goal = condition();
        rparen();
      } else {
        throw SemanticError(pos, "unsupported problem section '" + section + "'");
      }
    }
    rparen();
    expect_end();
    validate(dom, p);
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (t.kind != TokKind::End) ++pos_;
    return t;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw SyntaxError(peek().pos, describe(peek()), std::move(expected));
  }

  void lparen() {
    if (peek().kind != TokKind::LParen) fail({"'('"});
    next();
  }
  void rparen() {
    if (peek().kind != TokKind::RParen) fail({"')'"});
    next();
  }
  void expect_end() {
    if (peek().kind != TokKind::End) fail({"end of input"});
  }
  void keyword(std::string_view kw) {
    if (peek().kind != TokKind::Name || peek().text != kw) fail({"'" + std::string(kw) + "'"});
    next();
  }
  std::string name(const std::string& what) {
    if (peek().kind != TokKind::Name) fail({what});
    return next().text;
  }

  // NAME* [- TYPE NAME* ...]; variables=true requires '?' names.
  std::vector<TypedName> typed_list(bool variables) {
    std::vector<TypedName> out;
    std::size_t pending_from = 0;
    while (peek().kind == TokKind::Name) {
      if (peek().text == "-") {
        const SourcePos dash = peek().pos;
        next();
        if (peek().kind == TokKind::LParen) {
          throw SemanticError(peek().pos, "'either' types are not supported");
        }
        const std::string type = name("type name");
        if (pending_from == out.size()) throw SemanticError(dash, "type '" + type + "' assigned to no names");
        for (std::size_t k = pending_from; k < out.size(); ++k) out[k].type = type;
        pending_from = out.size();
        continue;
      }
      const Token& t = next();
      if (variables != is_variable(t.text)) {
        throw SyntaxError(t.pos, describe(t), {variables ? "variable" : "name"});
      }
      out.push_back({t.text, "object"});
    }
    return out;
  }

  Atom atom_after_lparen(SourcePos pos) {
    Atom a;
    a.pos = pos;
    a.predicate = name("predicate name");
    while (peek().kind == TokKind::Name) a.args.push_back(next().text);
    rparen();
    return a;
  }

  Literal literal() {
    const SourcePos pos = peek().pos;
    lparen();
    if (peek().kind == TokKind::Name && peek().text == "not") {
      next();
      const SourcePos inner = peek().pos;
      lparen();
      Literal l{atom_after_lparen(inner), true};
      rparen();
      return l;
    }
    return {atom_after_lparen(pos), false};
  }

  static bool unsupported_connective(std::string_view w) {
    return w == "or" || w == "imply" || w == "forall" || w == "exists" || w == "when" || w == "=" ||
           w == "increase" || w == "decrease" || w == "assign" || w == "either" || w == "probabilistic";
  }

  // Conjunction of literals; nested `and` flattens.
  std::vector<Literal> condition() {
    std::vector<Literal> out;
    const SourcePos pos = peek().pos;
    lparen();
    if (peek().kind == TokKind::RParen) {
      next();
      return out;
    }
    const Token& head = peek();
    if (head.kind == TokKind::Name && head.text == "and") {
      next();
      while (peek().kind == TokKind::LParen) {
        auto sub = condition();
        out.insert(out.end(), sub.begin(), sub.end());
      }
      rparen();
      return out;
    }
    if (head.kind == TokKind::Name && unsupported_connective(head.text)) {
      throw SemanticError(head.pos, "unsupported condition construct '" + head.text + "'");
    }
    if (head.kind == TokKind::Name && head.text == "not") {
      next();
      const SourcePos inner = peek().pos;
      lparen();
      if (peek().kind == TokKind::Name && unsupported_connective(peek().text)) {
        throw SemanticError(peek().pos, "unsupported condition construct '" + peek().text + "'");
      }
      out.push_back({atom_after_lparen(inner), true});
      rparen();
      return out;
    }
    out.push_back({atom_after_lparen(pos), false});
    return out;
  }

  // Returns the list of outcomes; `and` takes the cross product of its parts.
  std::vector<EffectSet> effect() {
    const SourcePos pos = peek().pos;
    lparen();
    if (peek().kind == TokKind::RParen) {
      next();
      return {EffectSet{}};
    }
    const Token& head = peek();
    if (head.kind == TokKind::Name && head.text == "and") {
      next();
      std::vector<EffectSet> acc{EffectSet{}};
      while (peek().kind == TokKind::LParen) {
        auto part = effect();
        std::vector<EffectSet> combined;
        combined.reserve(acc.size() * part.size());
        for (const auto& a : acc) {
          for (const auto& b : part) {
            EffectSet e = a;
            e.insert(e.end(), b.begin(), b.end());
            combined.push_back(std::move(e));
          }
        }
        acc = std::move(combined);
      }
      rparen();
      return acc;
    }
    if (head.kind == TokKind::Name && head.text == "oneof") {
      next();
      std::vector<EffectSet> out;
      int branches = 0;
      while (peek().kind == TokKind::LParen) {
        auto part = effect();
        out.insert(out.end(), part.begin(), part.end());
        ++branches;
      }
      if (branches < 2) fail({"'('"});
      rparen();
      return out;
    }
    if (head.kind == TokKind::Name && unsupported_connective(head.text)) {
      throw SemanticError(head.pos, "unsupported effect construct '" + head.text + "'");
    }
    if (head.kind == TokKind::Name && head.text == "not") {
      next();
      const SourcePos inner = peek().pos;
      lparen();
      Literal l{atom_after_lparen(inner), true};
      rparen();
      return {EffectSet{l}};
    }
    return {EffectSet{Literal{atom_after_lparen(pos), false}}};
  }

  ActionSchema action(const std::optional<std::string>& group_note, SourcePos pos) {
    ActionSchema a;
    a.pos = pos;
    a.name = name("action name");
    if (group_note) {
      auto g = parse_group(*group_note);
      if (!g) throw SemanticError(pos, "unknown action group '" + *group_note + "'");
      a.group = *g;
    }
    bool have_params = false;
    bool have_pre = false;
    bool have_eff = false;
    while (peek().kind == TokKind::Name) {
      const Token& key = next();
      if (key.text == ":parameters" && !have_params) {
        lparen();
        a.params = typed_list(true);
        rparen();
        have_params = true;
      } else if (key.text == ":precondition" && !have_pre) {
        a.precondition = condition();
        have_pre = true;
      } else if (key.text == ":effect" && !have_eff) {
        a.outcomes = effect();
        have_eff = true;
      } else {
        throw SyntaxError(key.pos, describe(key), {":parameters", ":precondition", ":effect"});
      }
    }
    rparen();
    if (!have_eff) a.outcomes = {EffectSet{}};
    return a;
  }

  void check_type(const DomainModel& d, const std::string& type, SourcePos pos) const {
    if (!d.has_type(type)) throw SemanticError(pos, "undeclared type '" + type + "'");
  }

  void validate(DomainModel& d) const {
    std::set<std::string> type_names{"object"};
    for (const auto& t : d.types) {
      if (t.name == "object") throw SemanticError({}, "type 'object' is implicit and cannot be redeclared");
      if (!type_names.insert(t.name).second) throw SemanticError({}, "duplicate type '" + t.name + "'");
    }
    for (const auto& t : d.types) {
      check_type(d, t.parent, {});
      if (t.parent != "object" && d.is_subtype(t.parent, t.name)) {
        throw SemanticError({}, "cyclic type hierarchy through '" + t.name + "'");
      }
    }
    std::set<std::string> const_names;
    for (const auto& c : d.constants) {
      check_type(d, c.type, {});
      if (!const_names.insert(c.name).second) throw SemanticError({}, "duplicate constant '" + c.name + "'");
    }
    std::set<std::string> pred_names;
    for (const auto& p : d.predicates) {
      if (!pred_names.insert(p.name).second) throw SemanticError(p.pos, "duplicate predicate '" + p.name + "'");
      for (const auto& param : p.params) check_type(d, param.type, p.pos);
    }
    std::set<std::string> action_names;
    for (auto& a : d.actions) {
      if (!action_names.insert(a.name).second) throw SemanticError(a.pos, "duplicate action '" + a.name + "'");
      std::map<std::string, std::string> vars;
      for (const auto& param : a.params) {
        check_type(d, param.type, a.pos);
        if (!vars.emplace(param.name, param.type).second) {
          throw SemanticError(a.pos, "duplicate parameter '" + param.name + "' in action '" + a.name + "'");
        }
      }
      auto check_atom = [&](const Atom& atom) {
        const PredicateDecl* p = d.find_predicate(atom.predicate);
        if (!p) throw SemanticError(atom.pos, "undeclared predicate '" + atom.predicate + "'");
        if (p->params.size() != atom.args.size()) {
          throw SemanticError(atom.pos, "arity mismatch for '" + atom.predicate + "': expected " +
                                            std::to_string(p->params.size()) + ", got " +
                                            std::to_string(atom.args.size()));
        }
        for (std::size_t k = 0; k < atom.args.size(); ++k) {
          const auto& arg = atom.args[k];
          std::string arg_type;
          if (is_variable(arg)) {
            auto it = vars.find(arg);
            if (it == vars.end()) {
              throw SemanticError(atom.pos, "unbound variable '" + arg + "' in action '" + a.name + "'");
            }
            arg_type = it->second;
          } else {
            auto it = std::find_if(d.constants.begin(), d.constants.end(),
                                   [&](const auto& c) { return c.name == arg; });
            if (it == d.constants.end()) throw SemanticError(atom.pos, "undeclared constant '" + arg + "'");
            arg_type = it->type;
          }
          if (!d.is_subtype(arg_type, p->params[k].type)) {
            throw SemanticError(atom.pos, "argument '" + arg + "' of type '" + arg_type +
                                              "' does not fit parameter type '" + p->params[k].type + "' of '" +
                                              atom.predicate + "'");
          }
        }
      };
      for (const auto& l : a.precondition) check_atom(l.atom);
      for (auto& outcome : a.outcomes) {
        EffectSet unique;
        for (const auto& l : outcome) {
          check_atom(l.atom);
          const bool dup = std::any_of(unique.begin(), unique.end(), [&](const Literal& u) {
            return u.atom.predicate == l.atom.predicate && u.atom.args == l.atom.args && u.negated == l.negated;
          });
          const bool clash = std::any_of(unique.begin(), unique.end(), [&](const Literal& u) {
            return u.atom.predicate == l.atom.predicate && u.atom.args == l.atom.args && u.negated != l.negated;
          });
          if (clash) {
            throw SemanticError(l.atom.pos, "outcome of '" + a.name + "' both adds and deletes " + format_atom(l.atom));
          }
          if (!dup) unique.push_back(l);
        }
        outcome = std::move(unique);
      }
    }
  }

  void validate(const DomainModel& d, ProblemModel& p) const {
    std::map<std::string, std::string> objects;
    for (const auto& c : d.constants) objects.emplace(c.name, c.type);
    for (const auto& o : p.objects) {
      if (!d.has_type(o.type)) throw SemanticError({}, "object '" + o.name + "' has unknown type '" + o.type + "'");
      if (!objects.emplace(o.name, o.type).second) throw SemanticError({}, "duplicate object '" + o.name + "'");
    }
    auto check_ground = [&](const Atom& atom) {
      const PredicateDecl* pred = d.find_predicate(atom.predicate);
      if (!pred) throw SemanticError(atom.pos, "undeclared predicate '" + atom.predicate + "'");
      if (pred->params.size() != atom.args.size()) {
        throw SemanticError(atom.pos, "arity mismatch for '" + atom.predicate + "'");
      }
      for (std::size_t k = 0; k < atom.args.size(); ++k) {
        auto it = objects.find(atom.args[k]);
        if (it == objects.end()) throw SemanticError(atom.pos, "undeclared object '" + atom.args[k] + "'");
        if (!d.is_subtype(it->second, pred->params[k].type)) {
          throw SemanticError(atom.pos, "object '" + atom.args[k] + "' does not fit parameter type '" +
                                            pred->params[k].type + "' of '" + atom.predicate + "'");
        }
      }
    };
    for (const auto& a : p.init) check_ground(a);
    for (const auto& l : p.goal) check_ground(l.atom);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

DomainModel parse_domain(std::string_view text) { return Parser(text).domain(); }

ProblemModel parse_problem(std::string_view text, const DomainModel& domain) {
  return Parser(text).problem(domain);
}

}  // namespace sarplan::pddl
