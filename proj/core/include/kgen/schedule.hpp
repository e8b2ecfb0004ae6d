#pragma once

// Linearized kernels: nested loops, instruction runs and barriers.

#include <map>
#include <string>
#include <vector>

#include "kgen/ir.hpp"

namespace kgen {

enum class LoopKind { Sequential, Unrolled, ILP, VecLane, GroupAxis, LocalAxis };

std::string_view loop_kind_name(LoopKind k);

/// Chosen loop bounds. `lower <= x <= upper`, x = residue (mod stride).
struct LoopRange {
  QuasiAff lower;
  QuasiAff upper;
  Int stride = 1;
  Int residue = 0;
  /// The constraints the range guarantees, for guard elision.
  std::vector<Constraint> implied;
};

struct ScheduleItem {
  enum class Kind { OpenLoop, CloseLoop, Run, Barrier };
  Kind kind = Kind::Run;
  /// Iname for loops, instruction id for runs.
  std::string name;
  LoopKind loop_kind = LoopKind::Sequential;
  LoopRange range;
  /// Run: residual conditions. OpenLoop: conditions hoisted out of the loop
  /// body, checked before the loop is entered.
  std::vector<Constraint> guard;

  static ScheduleItem open(std::string iname, LoopKind kind, LoopRange range);
  static ScheduleItem close(std::string iname);
  static ScheduleItem run(std::string id);
  static ScheduleItem barrier();
};

struct ScheduledKernel {
  Kernel kernel;
  std::vector<ScheduleItem> items;
  /// "g.0" / "l.1" -> number of groups / work items along that axis.
  std::map<std::string, QuasiAff> grid_sizes;
  /// Grid-tagged iname -> its value at axis index 0.
  std::map<std::string, AffExpr> grid_base;
  std::vector<std::string> warnings;
};

/// Orders instructions into loops without barriers or guards.
ScheduledKernel linearize(const Kernel& k);

/// Full pipeline: linearize, insert_barriers, compute_guards, and the vec
/// legality check.
ScheduledKernel schedule_kernel(const Kernel& k);

/// Adds local barriers for dependencies through local temporaries.
ScheduledKernel insert_barriers(const ScheduledKernel& s);

/// Recomputes run guards from scratch and hoists them outward.
ScheduledKernel compute_guards(const ScheduledKernel& s);

/// One item per line, indented by nesting depth.
std::string schedule_to_text(const ScheduledKernel& s);

/// isl-free rendering used by codegen and dumps: constant first, then
/// "k * v" terms sorted by name, parenthesized when compound.
std::string render_affine(const AffExpr& e);
/// floor(num / den) as "(q + ((c + rest) / den))" with 0 <= c < den.
std::string render_bound(const QuasiAff& q);
/// "(e) >= 0", "(e) == 0", "(e) % m == 0".
std::string render_constraint(const Constraint& c);

}  // namespace kgen
