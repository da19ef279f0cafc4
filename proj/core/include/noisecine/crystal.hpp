#pragma once

#include <optional>
#include <vector>

#include "noisecine/field.hpp"

namespace noisecine {

// Lattice-confined transforms. Values only ever move between grid cells; nothing is
// interpolated, so every output value is a copy of some input (or reservoir) value.

/// Integer translation in grid cells (+dx right, +dy down).
struct LatticeShift {
    int dx = 0;
    int dy = 0;
    bool wrap_x = true;
    bool wrap_y = true;

    bool is_identity() const noexcept { return dx == 0 && dy == 0; }
};

/// Per-row integer shift; row y moves right by shifts[y].
struct RowShiftProfile {
    std::vector<int> shifts;
    bool wrap = true;

    bool is_identity() const noexcept;
};

/// One pasted region: the source cells under `mask` land at (y + dy, x + dx).
struct MosaicPiece {
    Mask mask;
    int dx = 0;
    int dy = 0;
    bool wrap = true;
};

/// Pieces are pasted in order; later pieces overwrite earlier ones.
struct RegionMosaic {
    std::vector<MosaicPiece> pieces;
};

/// Cyclic shift. With wrap disabled on an axis, the overload without a reservoir throws
/// missing_reservoir; with a reservoir, vacated cells take the reservoir value at the same cell.
template <class Tag>
Field<Tag> roll(const Field<Tag>& x, const LatticeShift& shift);
template <class Tag>
Field<Tag> roll(const Field<Tag>& x, const LatticeShift& shift, const Field<Tag>& reservoir);

/// Shift per row that ramps linearly from far_shift at horizon_row to near_shift at row
/// height-1, rounded half away from zero. Rows above the horizon get far_shift. When the
/// horizon is the last row, that row gets far_shift.
RowShiftProfile discretize_shear(int horizon_row, int near_shift, int far_shift, int height);

/// Each row shifted by its own amount, all channels together.
template <class Tag>
Field<Tag> glide(const Field<Tag>& x, const RowShiftProfile& profile);
template <class Tag>
Field<Tag> glide(const Field<Tag>& x, const RowShiftProfile& profile, const Field<Tag>& reservoir);

/// Copies source values under each piece's mask onto base at the displaced positions.
template <class Tag>
Field<Tag> mosaic(const Field<Tag>& base, const Field<Tag>& source, const RegionMosaic& m);

/// A full per-frame crystal transform: shift, then glide, then mosaic pieces pasted from the
/// untransformed input onto the shifted/glided field.
struct CrystalTransform {
    LatticeShift shift;
    std::optional<RowShiftProfile> glide;
    RegionMosaic mosaic;

    bool is_identity() const noexcept;
    bool needs_reservoir() const noexcept;
};

template <class Tag>
Field<Tag> apply_transform(const Field<Tag>& x, const CrystalTransform& t);
template <class Tag>
Field<Tag> apply_transform(const Field<Tag>& x, const CrystalTransform& t, const Field<Tag>& reservoir);

/// The same transform expressed on a grid `factor` times finer: shifts scale by factor, each
/// profile row expands to factor rows, and masks become factor x factor blocks.
CrystalTransform scale_transform(const CrystalTransform& t, std::size_t factor);

/// Applies a latent-grid transform to a conditioning map that lives on the image grid.
ImageField transform_conditioning(const ImageField& segmap, const CrystalTransform& t,
                                  std::size_t factor = kVaeScale);
ImageField transform_conditioning(const ImageField& segmap, const CrystalTransform& t, const ImageField& reservoir,
                                  std::size_t factor = kVaeScale);

} // namespace noisecine
