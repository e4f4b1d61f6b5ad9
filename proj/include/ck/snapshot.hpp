#pragma once

// Field snapshots: a text header followed by one CSV row per lattice point of
// the patch, in the patch's row-major order (last axis fastest).
//
//   # ckfield v1
//   # manifold=TORUS2 dims=64,64 box_lo=0,0 box_len=33,64 kind=form degree=1 group=SU2 components=2
//   <re00,im00,re01,im01,re10,im10,re11,im11 for component 0>,<... component 1>
//
// A group field is kind=group, degree=0, one component.  Numbers are written
// with 17 significant digits, so a write/read cycle is exact.

#include <iosfwd>

#include "ck/form.hpp"

namespace ck {

void write_snapshot(std::ostream& os, const GroupField& g);
void write_snapshot(std::ostream& os, const FormField& w);

// The snapshot must describe a box of `grid`; throws SpecParse otherwise.
GroupField read_group_snapshot(std::istream& is, const std::shared_ptr<const BaseGrid>& grid);
FormField read_form_snapshot(std::istream& is, const std::shared_ptr<const BaseGrid>& grid);

}  // namespace ck
