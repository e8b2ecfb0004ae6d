#include "kgen/interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <sstream>

#include "kgen/analysis.hpp"

namespace kgen {

Buffer Buffer::zeros(DType t, std::vector<std::int64_t> shape) {
  Buffer b;
  b.dtype = t;
  b.shape = std::move(shape);
  if (is_float(t))
    b.real.assign(b.size(), 0.0);
  else
    b.integer.assign(b.size(), 0);
  return b;
}

std::size_t Buffer::size() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(std::max<std::int64_t>(d, 0));
  return n;
}

namespace {

std::int64_t fdiv(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t fmod_floor(std::int64_t a, std::int64_t b) { return a - fdiv(a, b) * b; }

struct Value {
  bool fp = false;
  double f = 0;
  std::int64_t i = 0;
};

Value convert(const Value& v, DType t) {
  Value r;
  if (is_float(t)) {
    r.fp = true;
    const double x = v.fp ? v.f : static_cast<double>(v.i);
    r.f = t == DType::F32 ? static_cast<double>(static_cast<float>(x)) : x;
  } else {
    const std::int64_t x = v.fp ? static_cast<std::int64_t>(v.f) : v.i;
    r.i = t == DType::I64 ? x : static_cast<std::int64_t>(static_cast<std::int32_t>(x));
  }
  return r;
}

// {{{ compiled affine forms

struct Lin {
  std::vector<std::pair<int, std::int64_t>> terms;
  std::int64_t constant = 0;

  std::int64_t eval(const std::vector<std::int64_t>& env) const {
    std::int64_t v = constant;
    for (const auto& [slot, c] : terms) v += c * env[static_cast<std::size_t>(slot)];
    return v;
  }
};

struct QLin {
  Lin num;
  std::int64_t den = 1;
  std::int64_t eval(const std::vector<std::int64_t>& env) const { return fdiv(num.eval(env), den); }
};

struct CCon {
  Lin e;
  ConstraintKind kind = ConstraintKind::Ge;
  std::int64_t modulus = 1;

  bool holds(const std::vector<std::int64_t>& env) const {
    const std::int64_t v = e.eval(env);
    switch (kind) {
      case ConstraintKind::Eq: return v == 0;
      case ConstraintKind::Ge: return v >= 0;
      case ConstraintKind::Div: return fmod_floor(v, modulus) == 0;
    }
    return false;
  }
};

bool all_hold(const std::vector<CCon>& cs, const std::vector<std::int64_t>& env) {
  for (const auto& c : cs)
    if (!c.holds(env)) return false;
  return true;
}

// Iteration range with every candidate bound kept.
struct CRange {
  int slot = -1;
  std::vector<QLin> lowers, uppers;
  std::int64_t stride = 1, residue = 0;

  std::int64_t first(const std::vector<std::int64_t>& env) const {
    std::int64_t lo = lowers.front().eval(env);
    for (const auto& l : lowers) lo = std::max(lo, l.eval(env));
    if (stride > 1) lo += fmod_floor(residue - lo, stride);
    return lo;
  }
  std::int64_t last(const std::vector<std::int64_t>& env) const {
    std::int64_t hi = uppers.front().eval(env);
    for (const auto& u : uppers) hi = std::min(hi, u.eval(env));
    return hi;
  }
};

// }}}

struct Node {
  enum class Op { Const, Slot, Load, Neg, Bin, Call, Reduce };
  Op op = Op::Const;
  DType type = DType::I32;
  Value konst;
  int slot = -1;
  int buffer = -1;
  BinOp bop = BinOp::Add;
  std::string fn;
  ReduceOp rop = ReduceOp::Sum;
  CRange range;
  std::vector<CCon> conds;
  std::vector<Node> kids;
};

struct CInsn {
  std::string id;
  int buffer = -1;
  std::vector<Node> index;
  Node rhs;
};

struct Storage {
  Buffer* buf = nullptr;
  std::vector<std::uint8_t>* init = nullptr;  // temporaries only
};

struct BufferInfo {
  std::string name;
  enum class Where { Global, Local, Private } where = Where::Global;
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
};

int64_t to_i64_checked(const Int& v) { return to_i64(v); }

// Shared preparation: types, parameters, buffers and compiled instructions.
class Machine {
 public:
  Machine(const Kernel& k, const ExecState& st) : st_(st) {
    std::map<std::string, DType> bindings;
    for (const auto& [n, b] : st.arrays)
      if (k.find_arg(n)) bindings[n] = b.dtype;
    k_ = infer_types(k, bindings);
    full_ = k_.full_domain();

    auto add_slot = [&](const std::string& n) {
      if (!slots_.count(n)) slots_[n] = static_cast<int>(slots_.size());
    };
    for (const auto& v : full_.set_vars()) add_slot(v);
    for (const auto& v : full_.params()) add_slot(v);
    for (const auto& a : k_.args)
      if (a.kind == ArgSpec::Kind::Value) add_slot(a.name);
    for (const auto& a : k_.args)
      if (a.shape)
        for (const auto& e : *a.shape)
          for (const auto& v : e.variables()) add_slot(v);
    env_.assign(slots_.size(), 0);
    bind_parameters();

    std::set<std::string> written;
    for (const auto& insn : k_.instructions) written.insert(insn.target());
    for (const auto& a : k_.args) {
      if (a.kind != ArgSpec::Kind::GlobalArray) continue;
      BufferInfo info{a.name, BufferInfo::Where::Global, a.dtype, {}};
      if (a.shape)
        for (const auto& e : *a.shape) info.shape.push_back(eval_param_expr(e));
      auto it = st.arrays.find(a.name);
      if (it != st.arrays.end()) {
        if (a.shape && it->second.shape != info.shape)
          throw Error(Errc::InvalidKernel, "array '" + a.name + "' has the wrong shape");
        info.shape = it->second.shape;
      } else if (!written.count(a.name)) {
        throw Error(Errc::UnboundParameter, "no data for input array '" + a.name + "'");
      } else if (!a.shape) {
        throw Error(Errc::InvalidKernel, "shape of output '" + a.name + "' is unknown");
      }
      add_buffer(info);
    }
    for (const auto& [n, t] : k_.temps) {
      BufferInfo info{n, t.space == AddressSpace::Local ? BufferInfo::Where::Local : BufferInfo::Where::Private,
                      t.dtype, {}};
      if (t.dtype == DType::Runtime) throw Error(Errc::Untypeable, "type of temporary '" + n + "' is unknown");
      for (const auto& e : t.shape) info.shape.push_back(eval_param_expr(e));
      add_buffer(info);
    }

    for (const auto& insn : k_.instructions) compile_insn(insn);
  }

  const Kernel& kernel() const { return k_; }
  const PolySet& full() const { return full_; }
  std::vector<std::int64_t>& env() { return env_; }
  const std::vector<BufferInfo>& buffers() const { return infos_; }
  int slot(const std::string& n) const {
    auto it = slots_.find(n);
    if (it == slots_.end()) throw Error(Errc::UnboundParameter, "no value for '" + n + "'");
    return it->second;
  }
  std::size_t insn_index(const std::string& id) const { return insn_ids_.at(id); }

  Lin lin(const AffExpr& e) const {
    Lin l;
    l.constant = to_i64_checked(e.constant());
    for (const auto& [n, c] : e.coefficients()) l.terms.emplace_back(slot(n), to_i64_checked(c));
    return l;
  }
  QLin qlin(const QuasiAff& q) const { return {lin(q.numerator), to_i64_checked(q.denominator)}; }
  CCon ccon(const Constraint& c) const { return {lin(c.expr()), c.kind(), c.kind() == ConstraintKind::Div ? to_i64_checked(c.modulus()) : 1}; }
  std::vector<CCon> ccons(const std::vector<Constraint>& cs) const {
    std::vector<CCon> out;
    for (const auto& c : cs) out.push_back(ccon(c));
    return out;
  }
  CRange crange(const PolySet& s, const std::string& x, const std::vector<std::string>& outer) const {
    const LoopBounds b = bounds(s, x, outer);
    CRange r;
    r.slot = slot(x);
    for (const auto& c : b.lower) r.lowers.push_back(qlin(c.value));
    for (const auto& c : b.upper) r.uppers.push_back(qlin(c.value));
    r.stride = to_i64_checked(b.stride);
    r.residue = to_i64_checked(b.residue);
    return r;
  }

  /// Fresh storage for one scope.
  struct Scope {
    std::vector<Buffer> data;
    std::vector<std::vector<std::uint8_t>> init;
  };
  Scope make_scope(BufferInfo::Where where) const {
    Scope s;
    s.data.resize(infos_.size());
    s.init.resize(infos_.size());
    for (std::size_t i = 0; i < infos_.size(); ++i) {
      if (infos_[i].where != where) continue;
      s.data[i] = Buffer::zeros(infos_[i].dtype, infos_[i].shape);
      s.init[i].assign(s.data[i].size(), 0);
    }
    return s;
  }
  std::vector<Buffer>& globals() { return globals_; }

  void bind(std::vector<Storage>& storage, Scope* local, Scope* priv) {
    storage.assign(infos_.size(), {});
    for (std::size_t i = 0; i < infos_.size(); ++i) {
      switch (infos_[i].where) {
        case BufferInfo::Where::Global: storage[i] = {&globals_[i], nullptr}; break;
        case BufferInfo::Where::Local: storage[i] = {&local->data[i], &local->init[i]}; break;
        case BufferInfo::Where::Private: storage[i] = {&priv->data[i], &priv->init[i]}; break;
      }
    }
  }

  void exec(std::size_t insn, std::vector<std::int64_t>& env, const std::vector<Storage>& storage) const {
    const CInsn& ci = insns_[insn];
    const Value v = eval(ci.rhs, env, storage);
    const std::size_t flat = locate(ci.buffer, ci.index, env, storage);
    const Storage& s = storage[static_cast<std::size_t>(ci.buffer)];
    const Value stored = convert(v, s.buf->dtype);
    if (is_float(s.buf->dtype))
      s.buf->real[flat] = stored.f;
    else
      s.buf->integer[flat] = stored.i;
    if (s.init) (*s.init)[flat] = 1;
  }

  ExecState result() const {
    ExecState out = st_;
    for (std::size_t i = 0; i < infos_.size(); ++i)
      if (infos_[i].where == BufferInfo::Where::Global) out.arrays[infos_[i].name] = globals_[i];
    return out;
  }

 private:
  void bind_parameters() {
    for (const auto& [n, v] : st_.scalars)
      if (slots_.count(n)) env_[static_cast<std::size_t>(slots_[n])] = v;
    std::set<std::string> bound;
    for (const auto& [n, v] : st_.scalars) bound.insert(n);
    std::vector<std::string> needed;
    for (const auto& p : full_.params()) needed.push_back(p);
    for (const auto& a : k_.args)
      if (a.kind == ArgSpec::Kind::Value) needed.push_back(a.name);
    for (const auto& p : needed) {
      if (bound.count(p)) continue;
      // Recover from an array shape of the form p + c.
      bool found = false;
      for (const auto& a : k_.args) {
        if (!a.shape || found) continue;
        auto it = st_.arrays.find(a.name);
        if (it == st_.arrays.end()) continue;
        for (std::size_t d = 0; d < a.shape->size() && d < it->second.shape.size(); ++d) {
          const AffExpr& e = (*a.shape)[d];
          if (e.coefficients().size() == 1 && e.coeff(p) == 1) {
            env_[static_cast<std::size_t>(slots_[p])] = it->second.shape[d] - to_i64(e.constant());
            found = true;
            break;
          }
        }
      }
      if (!found) throw Error(Errc::UnboundParameter, "no value for parameter '" + p + "'");
      bound.insert(p);
    }
  }

  std::int64_t eval_param_expr(const AffExpr& e) const { return lin(e).eval(env_); }

  void add_buffer(const BufferInfo& info) {
    buffer_ids_[info.name] = static_cast<int>(infos_.size());
    infos_.push_back(info);
    if (info.where == BufferInfo::Where::Global) {
      auto it = st_.arrays.find(info.name);
      globals_.push_back(it != st_.arrays.end() ? it->second : Buffer::zeros(info.dtype, info.shape));
    } else {
      globals_.emplace_back();
    }
  }

  Node compile(const ExprPtr& e, DType parent, const std::set<std::string>& bound) {
    Node n;
    if (const auto* v = e->as<Variable>()) {
      auto b = buffer_ids_.find(v->name);
      if (b != buffer_ids_.end() && !k_.is_iname(v->name)) {
        n.op = Node::Op::Load;
        n.buffer = b->second;
        n.type = infos_[static_cast<std::size_t>(b->second)].dtype;
        return n;
      }
      n.op = Node::Op::Slot;
      n.slot = slot(v->name);
      n.type = DType::I64;
      return n;
    }
    if (const auto* lit = e->as<IntLiteral>()) {
      n.konst.i = lit->value;
      n.type = DType::I64;
      return n;
    }
    if (const auto* lit = e->as<FloatLiteral>()) {
      n.konst.fp = true;
      n.type = DType::F64;
      n.konst.f = parent == DType::F32 ? static_cast<double>(std::strtof(lit->text.c_str(), nullptr)) : lit->value;
      return n;
    }
    if (const auto* s = e->as<Subscript>()) {
      auto b = buffer_ids_.find(s->array);
      if (b == buffer_ids_.end()) throw Error(Errc::UnknownArray, "'" + s->array + "' has no storage");
      n.op = Node::Op::Load;
      n.buffer = b->second;
      n.type = infos_[static_cast<std::size_t>(b->second)].dtype;
      for (const auto& i : s->index) n.kids.push_back(compile(i, DType::I64, bound));
      return n;
    }
    n.type = expression_type(k_, e);
    if (n.type == DType::Runtime) throw Error(Errc::Untypeable, "cannot type '" + to_text(e) + "'");
    if (const auto* neg = e->as<Negate>()) {
      n.op = Node::Op::Neg;
      n.kids.push_back(compile(neg->operand, n.type, bound));
    } else if (const auto* bin = e->as<Binary>()) {
      n.op = Node::Op::Bin;
      n.bop = bin->op;
      n.kids.push_back(compile(bin->lhs, n.type, bound));
      n.kids.push_back(compile(bin->rhs, n.type, bound));
    } else if (const auto* call = e->as<Call>()) {
      n.op = Node::Op::Call;
      n.fn = call->function;
      for (const auto& a : call->args) n.kids.push_back(compile(a, n.type, bound));
    } else if (const auto* red = e->as<Reduction>()) {
      n.op = Node::Op::Reduce;
      n.rop = red->op;
      std::set<std::string> inner = bound;
      inner.insert(red->iname);
      std::vector<std::string> scope(bound.begin(), bound.end());
      const PolySet p = project_onto(full_, [&] {
        auto s = scope;
        s.push_back(red->iname);
        return s;
      }());
      n.range = crange(p, red->iname, scope);
      for (const auto& c : p.constraints())
        if (c.involves(red->iname)) n.conds.push_back(ccon(c));
      n.slot = slot(red->iname);
      n.kids.push_back(compile(red->body, n.type, inner));
    }
    return n;
  }

  void compile_insn(const Instruction& insn) {
    CInsn ci;
    ci.id = insn.id;
    auto b = buffer_ids_.find(insn.target());
    if (b == buffer_ids_.end()) throw Error(Errc::UnknownArray, "'" + insn.target() + "' has no storage");
    ci.buffer = b->second;
    std::set<std::string> bound(insn.within_inames.begin(), insn.within_inames.end());
    if (const auto* s = insn.assignee->as<Subscript>())
      for (const auto& i : s->index) ci.index.push_back(compile(i, DType::I64, bound));
    ci.rhs = compile(expand_rules(k_, insn.rhs), infos_[static_cast<std::size_t>(ci.buffer)].dtype, bound);
    insn_ids_[insn.id] = insns_.size();
    insns_.push_back(std::move(ci));
  }

  std::size_t locate(int buffer, const std::vector<Node>& index, std::vector<std::int64_t>& env,
                     const std::vector<Storage>& storage) const {
    const Buffer& b = *storage[static_cast<std::size_t>(buffer)].buf;
    if (index.size() != b.shape.size())
      throw Error(Errc::RankMismatch, "'" + infos_[static_cast<std::size_t>(buffer)].name + "' indexed with " +
                                          std::to_string(index.size()) + " indices");
    std::size_t flat = 0;
    std::vector<std::int64_t> idx;
    bool bad = false;
    for (std::size_t d = 0; d < index.size(); ++d) {
      const std::int64_t i = convert(eval(index[d], env, storage), DType::I64).i;
      idx.push_back(i);
      if (i < 0 || i >= b.shape[d]) bad = true;
      flat = flat * static_cast<std::size_t>(std::max<std::int64_t>(b.shape[d], 0)) + static_cast<std::size_t>(std::max<std::int64_t>(i, 0));
    }
    if (bad) {
      std::ostringstream os;
      os << infos_[static_cast<std::size_t>(buffer)].name << "[";
      for (std::size_t d = 0; d < idx.size(); ++d) os << (d ? ", " : "") << idx[d];
      os << "] outside shape (";
      for (std::size_t d = 0; d < b.shape.size(); ++d) os << (d ? ", " : "") << b.shape[d];
      os << ")";
      throw Error(Errc::OutOfBounds, os.str());
    }
    return flat;
  }

  Value eval(const Node& n, std::vector<std::int64_t>& env, const std::vector<Storage>& storage) const {
    switch (n.op) {
      case Node::Op::Const: return n.konst;
      case Node::Op::Slot: {
        Value v;
        v.i = env[static_cast<std::size_t>(n.slot)];
        return v;
      }
      case Node::Op::Load: {
        const std::size_t flat = locate(n.buffer, n.kids, env, storage);
        const Storage& s = storage[static_cast<std::size_t>(n.buffer)];
        if (s.init && !(*s.init)[flat])
          throw Error(Errc::UninitializedRead,
                      "read of uninitialized '" + infos_[static_cast<std::size_t>(n.buffer)].name + "' element " +
                          std::to_string(flat));
        Value v;
        if (is_float(s.buf->dtype)) {
          v.fp = true;
          v.f = s.buf->real[flat];
        } else {
          v.i = s.buf->integer[flat];
        }
        return v;
      }
      case Node::Op::Neg: {
        Value v = convert(eval(n.kids[0], env, storage), n.type);
        if (v.fp)
          v.f = n.type == DType::F32 ? static_cast<double>(-static_cast<float>(v.f)) : -v.f;
        else
          v = convert(Value{false, 0, -v.i}, n.type);
        return v;
      }
      case Node::Op::Bin: return binary(n, convert(eval(n.kids[0], env, storage), n.type),
                                        convert(eval(n.kids[1], env, storage), n.type));
      case Node::Op::Call: return call(n, env, storage);
      case Node::Op::Reduce: return reduce(n, env, storage);
    }
    return {};
  }

  static Value binary(const Node& n, const Value& a, const Value& b) {
    Value r;
    if (is_float(n.type)) {
      r.fp = true;
      if (n.type == DType::F32) {
        const float x = static_cast<float>(a.f), y = static_cast<float>(b.f);
        float z = 0;
        switch (n.bop) {
          case BinOp::Add: z = x + y; break;
          case BinOp::Sub: z = x - y; break;
          case BinOp::Mul: z = x * y; break;
          case BinOp::Div: z = x / y; break;
          case BinOp::Mod: z = std::fmod(x, y); break;
        }
        r.f = static_cast<double>(z);
      } else {
        switch (n.bop) {
          case BinOp::Add: r.f = a.f + b.f; break;
          case BinOp::Sub: r.f = a.f - b.f; break;
          case BinOp::Mul: r.f = a.f * b.f; break;
          case BinOp::Div: r.f = a.f / b.f; break;
          case BinOp::Mod: r.f = std::fmod(a.f, b.f); break;
        }
      }
      return r;
    }
    std::int64_t z = 0;
    switch (n.bop) {
      case BinOp::Add: z = a.i + b.i; break;
      case BinOp::Sub: z = a.i - b.i; break;
      case BinOp::Mul: z = a.i * b.i; break;
      case BinOp::Div:
      case BinOp::Mod:
        if (b.i == 0) throw Error(Errc::DivisionByZero, "integer division by zero");
        z = n.bop == BinOp::Div ? a.i / b.i : a.i % b.i;
        break;
    }
    return convert(Value{false, 0, z}, n.type);
  }

  Value call(const Node& n, std::vector<std::int64_t>& env, const std::vector<Storage>& storage) const {
    std::vector<Value> args;
    for (const auto& k : n.kids) args.push_back(convert(eval(k, env, storage), n.type));
    auto need = [&](std::size_t c) {
      if (args.size() != c)
        throw Error(Errc::InvalidKernel, "'" + n.fn + "' takes " + std::to_string(c) + " arguments");
    };
    const std::string& f = n.fn;
    if (f == "min" || f == "max" || f == "fmin" || f == "fmax") {
      need(2);
      const bool lo = f == "min" || f == "fmin";
      if (args[0].fp) return convert(Value{true, lo ? std::fmin(args[0].f, args[1].f) : std::fmax(args[0].f, args[1].f), 0}, n.type);
      return Value{false, 0, lo ? std::min(args[0].i, args[1].i) : std::max(args[0].i, args[1].i)};
    }
    if (f == "abs" && !is_float(n.type)) {
      need(1);
      return convert(Value{false, 0, std::abs(args[0].i)}, n.type);
    }
    if (f == "pow") {
      need(2);
      if (n.type == DType::F32)
        return Value{true, static_cast<double>(std::pow(static_cast<float>(args[0].f), static_cast<float>(args[1].f))), 0};
      return Value{true, std::pow(args[0].f, args[1].f), 0};
    }
    need(1);
    const double x = args[0].f;
    const bool single = n.type == DType::F32;
    const float xf = static_cast<float>(x);
    double r = 0;
    if (f == "sqrt") r = single ? std::sqrt(xf) : std::sqrt(x);
    else if (f == "rsqrt") r = single ? 1.0f / std::sqrt(xf) : 1.0 / std::sqrt(x);
    else if (f == "exp") r = single ? std::exp(xf) : std::exp(x);
    else if (f == "log") r = single ? std::log(xf) : std::log(x);
    else if (f == "sin") r = single ? std::sin(xf) : std::sin(x);
    else if (f == "cos") r = single ? std::cos(xf) : std::cos(x);
    else if (f == "tan") r = single ? std::tan(xf) : std::tan(x);
    else if (f == "tanh") r = single ? std::tanh(xf) : std::tanh(x);
    else if (f == "atan") r = single ? std::atan(xf) : std::atan(x);
    else if (f == "asin") r = single ? std::asin(xf) : std::asin(x);
    else if (f == "acos") r = single ? std::acos(xf) : std::acos(x);
    else if (f == "fabs" || f == "abs") r = single ? std::fabs(xf) : std::fabs(x);
    else if (f == "floor") r = single ? std::floor(xf) : std::floor(x);
    else if (f == "ceil") r = single ? std::ceil(xf) : std::ceil(x);
    else throw Error(Errc::InvalidKernel, "unknown function '" + f + "'");
    return convert(Value{true, r, 0}, n.type);
  }

  // Directly nested reductions with the same operator share one
  // accumulator, so splitting a reduction iname keeps the summation order.
  void accumulate(const Node& n, std::vector<std::int64_t>& env, const std::vector<Storage>& storage,
                  std::optional<Value>& acc) const {
    const std::size_t slot = static_cast<std::size_t>(n.slot);
    const std::int64_t saved = env[slot];
    const Node& body = n.kids[0];
    const bool flat = body.op == Node::Op::Reduce && body.rop == n.rop && body.type == n.type;
    Node op;
    op.type = n.type;
    op.bop = n.rop == ReduceOp::Product ? BinOp::Mul : BinOp::Add;
    const std::int64_t hi = n.range.last(env);
    for (std::int64_t x = n.range.first(env); x <= hi; x += n.range.stride) {
      env[slot] = x;
      if (!all_hold(n.conds, env)) continue;
      if (flat) {
        accumulate(body, env, storage, acc);
        continue;
      }
      const Value v = convert(eval(body, env, storage), n.type);
      if (!acc) {
        acc = v;
      } else if (n.rop == ReduceOp::Sum || n.rop == ReduceOp::Product) {
        acc = binary(op, *acc, v);
      } else {
        const bool take = v.fp ? (n.rop == ReduceOp::Min ? v.f < acc->f : v.f > acc->f)
                               : (n.rop == ReduceOp::Min ? v.i < acc->i : v.i > acc->i);
        if (take) acc = v;
      }
    }
    env[slot] = saved;
  }

  Value reduce(const Node& n, std::vector<std::int64_t>& env, const std::vector<Storage>& storage) const {
    std::optional<Value> acc;
    if (n.rop == ReduceOp::Sum) acc = convert(Value{}, n.type);
    if (n.rop == ReduceOp::Product) acc = convert(Value{false, 0, 1}, n.type);
    accumulate(n, env, storage, acc);
    if (!acc) throw Error(Errc::InvalidKernel, "empty " + std::string(reduce_op_name(n.rop)) + " reduction");
    return *acc;
  }

  ExecState st_;
  Kernel k_;
  PolySet full_;
  std::map<std::string, int> slots_;
  std::vector<std::int64_t> env_;
  std::vector<BufferInfo> infos_;
  std::map<std::string, int> buffer_ids_;
  std::vector<Buffer> globals_;
  std::vector<CInsn> insns_;
  std::map<std::string, std::size_t> insn_ids_;
};

// {{{ schedule execution

struct CItem {
  ScheduleItem::Kind kind;
  int slot = -1;
  QLin lower, upper;
  std::int64_t stride = 1, residue = 0;
  std::vector<CCon> guard;
  std::size_t insn = 0;
  std::size_t partner = 0;  // matching close / open
};

struct Frame {
  std::int64_t hi;
};

struct WorkItem {
  std::vector<std::int64_t> env;
  Machine::Scope priv;
  std::vector<Storage> storage;
  std::size_t pc = 0;
  std::vector<Frame> frames;
  bool finished = false;
};

// Runs until a barrier or the end. Returns true at a barrier.
bool advance(const Machine& m, const std::vector<CItem>& items, WorkItem& w) {
  while (w.pc < items.size()) {
    const CItem& it = items[w.pc];
    switch (it.kind) {
      case ScheduleItem::Kind::OpenLoop: {
        if (!all_hold(it.guard, w.env)) {
          w.pc = it.partner + 1;
          break;
        }
        std::int64_t lo = it.lower.eval(w.env);
        if (it.stride > 1) lo += fmod_floor(it.residue - lo, it.stride);
        const std::int64_t hi = it.upper.eval(w.env);
        if (lo > hi) {
          w.pc = it.partner + 1;
          break;
        }
        w.env[static_cast<std::size_t>(it.slot)] = lo;
        w.frames.push_back({hi});
        ++w.pc;
        break;
      }
      case ScheduleItem::Kind::CloseLoop: {
        const CItem& open = items[it.partner];
        auto& x = w.env[static_cast<std::size_t>(open.slot)];
        x += open.stride;
        if (x <= w.frames.back().hi) {
          w.pc = it.partner + 1;
        } else {
          w.frames.pop_back();
          ++w.pc;
        }
        break;
      }
      case ScheduleItem::Kind::Run:
        if (all_hold(it.guard, w.env)) m.exec(it.insn, w.env, w.storage);
        ++w.pc;
        break;
      case ScheduleItem::Kind::Barrier: ++w.pc; return true;
    }
  }
  w.finished = true;
  return false;
}

std::vector<std::vector<std::int64_t>> tuples(const std::vector<std::int64_t>& sizes) {
  std::vector<std::vector<std::int64_t>> out{{}};
  for (auto n : sizes) {
    std::vector<std::vector<std::int64_t>> next;
    for (const auto& t : out)
      for (std::int64_t i = 0; i < n; ++i) {
        auto u = t;
        u.push_back(i);
        next.push_back(std::move(u));
      }
    out = std::move(next);
  }
  return out;
}

// }}}

}  // namespace

ExecState run(const ScheduledKernel& s, const ExecState& st) {
  Machine m(s.kernel, st);
  const Kernel& k = m.kernel();

  std::vector<CItem> items;
  std::vector<std::size_t> opens;
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    const auto& it = s.items[i];
    CItem c;
    c.kind = it.kind;
    c.guard = m.ccons(it.guard);
    switch (it.kind) {
      case ScheduleItem::Kind::OpenLoop:
        c.slot = m.slot(it.name);
        c.lower = m.qlin(it.range.lower);
        c.upper = m.qlin(it.range.upper);
        c.stride = to_i64(it.range.stride);
        c.residue = to_i64(it.range.residue);
        opens.push_back(i);
        break;
      case ScheduleItem::Kind::CloseLoop:
        c.partner = opens.back();
        items[opens.back()].partner = i;
        opens.pop_back();
        break;
      case ScheduleItem::Kind::Run: c.insn = m.insn_index(it.name); break;
      case ScheduleItem::Kind::Barrier: break;
    }
    items.push_back(std::move(c));
  }

  // Grid extents.
  auto axis_size = [&](const std::string& axis) -> std::int64_t {
    auto it = s.grid_sizes.find(axis);
    if (it == s.grid_sizes.end()) return 1;
    return std::max<std::int64_t>(m.qlin(it->second).eval(m.env()), 0);
  };
  std::vector<std::int64_t> groups, locals;
  for (int a = 0; a < 3; ++a) {
    groups.push_back(axis_size("g." + std::to_string(a)));
    locals.push_back(axis_size("l." + std::to_string(a)));
  }
  struct GridIname {
    int slot;
    bool local;
    int axis;
    std::int64_t base;
  };
  std::vector<GridIname> grid;
  for (const auto& [n, base] : s.grid_base) {
    const InameTag t = k.tag_of(n);
    grid.push_back({m.slot(n), t.kind == InameTag::Kind::Local, t.axis, m.lin(base).eval(m.env())});
  }

  std::mt19937_64 rng(st.seed);
  auto group_ids = tuples(groups);
  std::shuffle(group_ids.begin(), group_ids.end(), rng);
  const auto local_ids = tuples(locals);
  for (const auto& g : group_ids) {
    Machine::Scope local = m.make_scope(BufferInfo::Where::Local);
    std::vector<WorkItem> wis(local_ids.size());
    for (std::size_t w = 0; w < wis.size(); ++w) {
      WorkItem& wi = wis[w];
      wi.env = m.env();
      for (const auto& gi : grid)
        wi.env[static_cast<std::size_t>(gi.slot)] =
            gi.base + (gi.local ? local_ids[w][static_cast<std::size_t>(gi.axis)] : g[static_cast<std::size_t>(gi.axis)]);
      wi.priv = m.make_scope(BufferInfo::Where::Private);
      m.bind(wi.storage, &local, &wi.priv);
    }
    std::vector<std::size_t> order(wis.size());
    std::iota(order.begin(), order.end(), 0);
    while (true) {
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t at_barrier = 0;
      for (std::size_t w : order)
        if (advance(m, items, wis[w])) ++at_barrier;
      if (at_barrier == 0) break;
      if (at_barrier != wis.size())
        throw Error(Errc::BarrierInsideIllegalContext, "work items of one group disagree on reaching a barrier");
    }
  }
  return m.result();
}

ExecState reference_run(const Kernel& k, const ExecState& st) {
  Machine m(k, st);
  const Kernel& kt = m.kernel();
  Machine::Scope temps = m.make_scope(BufferInfo::Where::Private);
  Machine::Scope local_temps = m.make_scope(BufferInfo::Where::Local);
  std::vector<Storage> storage;
  m.bind(storage, &local_temps, &temps);

  for (const auto& id : topological_order(kt)) {
    const Instruction& insn = *kt.find_insn(id);
    std::vector<std::string> inames;
    for (const auto& v : m.full().set_vars())
      if (insn.within_inames.count(v)) inames.push_back(v);
    std::vector<CRange> levels;
    for (std::size_t j = 0; j < inames.size(); ++j) {
      const std::vector<std::string> prefix(inames.begin(), inames.begin() + static_cast<std::ptrdiff_t>(j + 1));
      levels.push_back(m.crange(project_onto(m.full(), prefix), inames[j],
                                std::vector<std::string>(prefix.begin(), prefix.end() - 1)));
    }
    const std::vector<CCon> conds = m.ccons(project_onto(m.full(), inames).constraints());
    const std::size_t index = m.insn_index(id);
    std::vector<std::int64_t> env = m.env();
    std::function<void(std::size_t)> walk = [&](std::size_t j) {
      if (j == levels.size()) {
        if (all_hold(conds, env)) m.exec(index, env, storage);
        return;
      }
      const CRange& r = levels[j];
      const std::int64_t hi = r.last(env);
      for (std::int64_t x = r.first(env); x <= hi; x += r.stride) {
        env[static_cast<std::size_t>(r.slot)] = x;
        walk(j + 1);
      }
    };
    walk(0);
  }
  return m.result();
}

ExecState random_state(const Kernel& k, const std::map<std::string, std::int64_t>& params,
                       const std::map<std::string, DType>& dtypes, std::uint64_t seed) {
  ExecState st;
  st.scalars = params;
  st.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> ints(-9, 9);
  std::uniform_real_distribution<double> reals(-1.0, 1.0);
  for (const auto& a : k.args) {
    if (a.kind != ArgSpec::Kind::GlobalArray) continue;
    if (!a.shape) throw Error(Errc::InvalidKernel, "shape of '" + a.name + "' is unknown");
    DType t = a.dtype == DType::Runtime ? DType::F32 : a.dtype;
    if (auto it = dtypes.find(a.name); it != dtypes.end()) t = it->second;
    std::vector<std::int64_t> shape;
    for (const auto& e : *a.shape)
      shape.push_back(to_i64(e.eval([&](const std::string& n) -> Int {
        auto it = params.find(n);
        if (it == params.end()) throw Error(Errc::UnboundParameter, "no value for parameter '" + n + "'");
        return it->second;
      })));
    Buffer b = Buffer::zeros(t, shape);
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (is_float(t))
        b.real[i] = t == DType::F32 ? static_cast<double>(static_cast<float>(reals(rng))) : reals(rng);
      else
        b.integer[i] = ints(rng);
    }
    st.arrays[a.name] = std::move(b);
  }
  return st;
}

std::optional<std::string> compare_states(const ExecState& a, const ExecState& b, double rel_tol) {
  for (const auto& [name, x] : a.arrays) {
    auto it = b.arrays.find(name);
    if (it == b.arrays.end()) return "array '" + name + "' missing";
    const Buffer& y = it->second;
    if (x.shape != y.shape || x.dtype != y.dtype) return "array '" + name + "' differs in shape or type";
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool same;
      if (is_float(x.dtype)) {
        const double u = x.real[i], v = y.real[i];
        same = u == v || (std::isnan(u) && std::isnan(v)) ||
               (rel_tol > 0 && std::fabs(u - v) <= rel_tol * std::max(std::fabs(u), std::fabs(v)));
      } else {
        same = x.integer[i] == y.integer[i];
      }
      if (!same) {
        std::ostringstream os;
        os << name << "[" << i << "]: " << x.as_double(i) << " vs. " << y.as_double(i);
        return os.str();
      }
    }
  }
  for (const auto& [name, y] : b.arrays)
    if (!a.arrays.count(name)) return "array '" + name + "' missing";
  return std::nullopt;
}

}  // namespace kgen
