#include "noisecine/crystal.hpp"

#include <algorithm>

namespace noisecine {

namespace {

template <class Tag>
Field<Tag> roll_impl(const Field<Tag>& x, const LatticeShift& s, const Field<Tag>* reservoir)
{
    if ((!s.wrap_x || !s.wrap_y) && reservoir == nullptr && !s.is_identity()) {
        fail(Errc::missing_reservoir, "roll: wrap disabled but no reservoir field supplied");
    }
    if (reservoir != nullptr) {
        require_same_shape(x, *reservoir, "roll reservoir");
    }
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    Field<Tag> out(x.shape());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            std::ptrdiff_t sy = y - s.dy;
            const bool y_in = sy >= 0 && sy < h;
            if (s.wrap_y) {
                sy = wrap_index(sy, h);
            }
            for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
                std::ptrdiff_t sx = xx - s.dx;
                const bool x_in = sx >= 0 && sx < w;
                if (s.wrap_x) {
                    sx = wrap_index(sx, w);
                }
                if ((s.wrap_y || y_in) && (s.wrap_x || x_in)) {
                    out(c, y, xx) = x(c, sy, sx);
                } else {
                    out(c, y, xx) = (*reservoir)(c, y, xx);
                }
            }
        }
    }
    return out;
}

template <class Tag>
Field<Tag> glide_impl(const Field<Tag>& x, const RowShiftProfile& p, const Field<Tag>* reservoir)
{
    if (p.shifts.size() != x.height()) {
        fail(Errc::shape_mismatch, "glide: profile has " + std::to_string(p.shifts.size()) + " rows, field has " +
                                       std::to_string(x.height()));
    }
    if (!p.wrap && reservoir == nullptr && !p.is_identity()) {
        fail(Errc::missing_reservoir, "glide: wrap disabled but no reservoir field supplied");
    }
    if (reservoir != nullptr) {
        require_same_shape(x, *reservoir, "glide reservoir");
    }
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    Field<Tag> out(x.shape());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t y = 0; y < x.height(); ++y) {
            const std::ptrdiff_t shift = p.shifts[y];
            for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
                const std::ptrdiff_t sx = xx - shift;
                if (p.wrap) {
                    out(c, y, xx) = x(c, y, wrap_index(sx, w));
                } else if (sx >= 0 && sx < w) {
                    out(c, y, xx) = x(c, y, sx);
                } else {
                    out(c, y, xx) = (*reservoir)(c, y, xx);
                }
            }
        }
    }
    return out;
}

template <class Tag>
Field<Tag> apply_impl(const Field<Tag>& x, const CrystalTransform& t, const Field<Tag>* reservoir)
{
    Field<Tag> moved = roll_impl(x, t.shift, reservoir);
    if (t.glide) {
        moved = glide_impl(moved, *t.glide, reservoir);
    }
    if (!t.mosaic.pieces.empty()) {
        moved = mosaic(moved, x, t.mosaic);
    }
    return moved;
}

// Rounded (num / den) with ties away from zero; den > 0.
long long div_round_half_away(long long num, long long den)
{
    if (num >= 0) {
        return (2 * num + den) / (2 * den);
    }
    return -((-2 * num + den) / (2 * den));
}

} // namespace

bool RowShiftProfile::is_identity() const noexcept
{
    return std::all_of(shifts.begin(), shifts.end(), [](int s) { return s == 0; });
}

bool CrystalTransform::is_identity() const noexcept
{
    return shift.is_identity() && (!glide || glide->is_identity()) && mosaic.pieces.empty();
}

bool CrystalTransform::needs_reservoir() const noexcept
{
    if (!shift.is_identity() && (!shift.wrap_x || !shift.wrap_y)) {
        return true;
    }
    return glide && !glide->wrap && !glide->is_identity();
}

template <class Tag>
Field<Tag> roll(const Field<Tag>& x, const LatticeShift& shift)
{
    return roll_impl<Tag>(x, shift, nullptr);
}

template <class Tag>
Field<Tag> roll(const Field<Tag>& x, const LatticeShift& shift, const Field<Tag>& reservoir)
{
    return roll_impl<Tag>(x, shift, &reservoir);
}

RowShiftProfile discretize_shear(int horizon_row, int near_shift, int far_shift, int height)
{
    if (height < 1) {
        fail(Errc::out_of_range, "discretize_shear: height must be >= 1");
    }
    if (horizon_row < 0 || horizon_row >= height) {
        fail(Errc::out_of_range, "discretize_shear: horizon_row " + std::to_string(horizon_row) +
                                     " outside [0, " + std::to_string(height) + ")");
    }
    RowShiftProfile profile;
    profile.shifts.assign(static_cast<std::size_t>(height), far_shift);
    const long long span = height - 1 - horizon_row;
    if (span == 0) {
        return profile;
    }
    const long long delta = static_cast<long long>(near_shift) - far_shift;
    for (int row = horizon_row; row < height; ++row) {
        profile.shifts[static_cast<std::size_t>(row)] =
            static_cast<int>(div_round_half_away(far_shift * span + delta * (row - horizon_row), span));
    }
    return profile;
}

template <class Tag>
Field<Tag> glide(const Field<Tag>& x, const RowShiftProfile& profile)
{
    return glide_impl<Tag>(x, profile, nullptr);
}

template <class Tag>
Field<Tag> glide(const Field<Tag>& x, const RowShiftProfile& profile, const Field<Tag>& reservoir)
{
    return glide_impl<Tag>(x, profile, &reservoir);
}

template <class Tag>
Field<Tag> mosaic(const Field<Tag>& base, const Field<Tag>& source, const RegionMosaic& m)
{
    require_same_shape(base, source, "mosaic");
    const auto h = static_cast<std::ptrdiff_t>(base.height());
    const auto w = static_cast<std::ptrdiff_t>(base.width());
    Field<Tag> out = base;
    for (std::size_t i = 0; i < m.pieces.size(); ++i) {
        const MosaicPiece& piece = m.pieces[i];
        if (piece.mask.height() != base.height() || piece.mask.width() != base.width()) {
            fail(Errc::shape_mismatch, "mosaic piece " + std::to_string(i) + ": mask is " +
                                           std::to_string(piece.mask.height()) + "x" +
                                           std::to_string(piece.mask.width()) + ", grid is " +
                                           std::to_string(h) + "x" + std::to_string(w));
        }
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
                if (!piece.mask(static_cast<std::size_t>(y), static_cast<std::size_t>(xx))) {
                    continue;
                }
                std::ptrdiff_t ty = y + piece.dy;
                std::ptrdiff_t tx = xx + piece.dx;
                if (piece.wrap) {
                    ty = wrap_index(ty, h);
                    tx = wrap_index(tx, w);
                } else if (ty < 0 || ty >= h || tx < 0 || tx >= w) {
                    fail(Errc::out_of_bounds, "mosaic piece " + std::to_string(i) + ": displaced mask leaves the grid at (" +
                                                  std::to_string(ty) + ", " + std::to_string(tx) + ")");
                }
                for (std::size_t c = 0; c < base.channels(); ++c) {
                    out(c, ty, tx) = source(c, y, xx);
                }
            }
        }
    }
    return out;
}

template <class Tag>
Field<Tag> apply_transform(const Field<Tag>& x, const CrystalTransform& t)
{
    return apply_impl<Tag>(x, t, nullptr);
}

template <class Tag>
Field<Tag> apply_transform(const Field<Tag>& x, const CrystalTransform& t, const Field<Tag>& reservoir)
{
    return apply_impl<Tag>(x, t, &reservoir);
}

CrystalTransform scale_transform(const CrystalTransform& t, std::size_t factor)
{
    const int f = static_cast<int>(factor);
    CrystalTransform out;
    out.shift = t.shift;
    out.shift.dx *= f;
    out.shift.dy *= f;
    if (t.glide) {
        RowShiftProfile profile;
        profile.wrap = t.glide->wrap;
        profile.shifts.reserve(t.glide->shifts.size() * factor);
        for (int s : t.glide->shifts) {
            profile.shifts.insert(profile.shifts.end(), factor, s * f);
        }
        out.glide = std::move(profile);
    }
    for (const MosaicPiece& piece : t.mosaic.pieces) {
        out.mosaic.pieces.push_back(MosaicPiece{piece.mask.upscaled(factor), piece.dx * f, piece.dy * f, piece.wrap});
    }
    return out;
}

namespace {

void check_conditioning_grid(const ImageField& segmap, const CrystalTransform& t, std::size_t factor)
{
    if (factor == 0 || segmap.height() % factor != 0 || segmap.width() % factor != 0) {
        fail(Errc::shape_mismatch, "transform_conditioning: segmap " + to_string(segmap.shape()) +
                                       " is not a multiple of the scale factor " + std::to_string(factor));
    }
    if (t.glide && t.glide->shifts.size() * factor != segmap.height()) {
        fail(Errc::shape_mismatch, "transform_conditioning: glide profile rows do not match segmap height / " +
                                       std::to_string(factor));
    }
    for (const MosaicPiece& piece : t.mosaic.pieces) {
        if (piece.mask.height() * factor != segmap.height() || piece.mask.width() * factor != segmap.width()) {
            fail(Errc::shape_mismatch, "transform_conditioning: mosaic mask does not match segmap grid / " +
                                           std::to_string(factor));
        }
    }
}

} // namespace

ImageField transform_conditioning(const ImageField& segmap, const CrystalTransform& t, std::size_t factor)
{
    check_conditioning_grid(segmap, t, factor);
    return apply_transform(segmap, scale_transform(t, factor));
}

ImageField transform_conditioning(const ImageField& segmap, const CrystalTransform& t, const ImageField& reservoir,
                                  std::size_t factor)
{
    check_conditioning_grid(segmap, t, factor);
    return apply_transform(segmap, scale_transform(t, factor), reservoir);
}

#define NOISECINE_INSTANTIATE_CRYSTAL(Tag)                                                              \
    template Field<Tag> roll<Tag>(const Field<Tag>&, const LatticeShift&);                              \
    template Field<Tag> roll<Tag>(const Field<Tag>&, const LatticeShift&, const Field<Tag>&);           \
    template Field<Tag> glide<Tag>(const Field<Tag>&, const RowShiftProfile&);                          \
    template Field<Tag> glide<Tag>(const Field<Tag>&, const RowShiftProfile&, const Field<Tag>&);       \
    template Field<Tag> mosaic<Tag>(const Field<Tag>&, const Field<Tag>&, const RegionMosaic&);         \
    template Field<Tag> apply_transform<Tag>(const Field<Tag>&, const CrystalTransform&);               \
    template Field<Tag> apply_transform<Tag>(const Field<Tag>&, const CrystalTransform&, const Field<Tag>&);

NOISECINE_INSTANTIATE_CRYSTAL(LatentTag)
NOISECINE_INSTANTIATE_CRYSTAL(ImageTag)
NOISECINE_INSTANTIATE_CRYSTAL(PlaneTag)

#undef NOISECINE_INSTANTIATE_CRYSTAL

} // namespace noisecine
