#include "textkernel/labelgen.hpp"

#include <algorithm>
#include <vector>

#include "textkernel/errors.hpp"

namespace textkernel {
namespace {

Polygon scale_about_centroid(const Polygon& p, double r) {
    const Point c = polygon_centroid(p);
    std::vector<Point> v = p.vertices();
    for (Point& q : v) q = c + (q - c) * r;
    return Polygon::unchecked(std::move(v));
}

void paint(Mask& dst, const Mask& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) {
        dst.data[i] |= src.data[i];
    }
}

}  // namespace

double shrink_offset(const Polygon& p, double r) {
    if (!(r > 0.0 && r <= 1.0)) {
        throw InvalidGeometryError("shrink ratio must be in (0, 1]");
    }
    const double perimeter = polygon_perimeter(p);
    if (perimeter <= 0.0) {
        throw InvalidGeometryError("zero-perimeter polygon");
    }
    return polygon_area(p) * (1.0 - r * r) / perimeter;
}

std::vector<Polygon> shrink_polygon(const Polygon& p, double r) {
    return offset_polygon(p, -shrink_offset(p, r));
}

ClassMask generate_class_mask(const std::vector<Annotation>& annots, int width, int height,
                              double r, int* collapse_count) {
    if (collapse_count) *collapse_count = 0;
    ClassMask classes(height, width);

    // text rasters and kernel rasters of every non-ignore instance, then two
    // painting passes so kernels always overwrite borders
    std::vector<Mask> texts;
    std::vector<Mask> kernels;
    for (const Annotation& a : annots) {
        if (a.ignore) continue;
        Mask text = rasterize_fill(a.polygon, width, height);
        const bool text_any = std::find(text.data.begin(), text.data.end(), 1) != text.data.end();

        auto paint_clipped = [&](const std::vector<Polygon>& pieces) {
            Mask kernel(height, width);
            for (const Polygon& piece : pieces) {
                paint(kernel, rasterize_fill(piece, width, height));
            }
            // the kernel may only claim pixels of its own text raster (centroid
            // fallbacks of concave polygons can poke outside)
            for (std::size_t i = 0; i < kernel.data.size(); ++i) {
                kernel.data[i] &= text.data[i];
            }
            return kernel;
        };
        auto any = [](const Mask& m) {
            return std::find(m.data.begin(), m.data.end(), 1) != m.data.end();
        };

        Mask kernel = paint_clipped(shrink_polygon(a.polygon, r));
        // an instance must not lose its kernel: when the inward offset
        // vanishes or covers no pixel center, rescale about the centroid
        if (text_any && !any(kernel)) {
            kernel = paint_clipped({scale_about_centroid(a.polygon, r)});
            if (collapse_count) ++*collapse_count;
        }
        texts.push_back(std::move(text));
        kernels.push_back(std::move(kernel));
    }

    for (const Mask& text : texts) {
        for (std::size_t i = 0; i < text.data.size(); ++i) {
            if (text.data[i]) classes.data[i] = 2;
        }
    }
    for (const Mask& kernel : kernels) {
        for (std::size_t i = 0; i < kernel.data.size(); ++i) {
            if (kernel.data[i]) classes.data[i] = 1;
        }
    }
    return classes;
}

Mask generate_text_mask(const std::vector<Annotation>& annots, int width, int height) {
    Mask out(height, width);
    for (const Annotation& a : annots) {
        if (a.ignore) continue;
        paint(out, rasterize_fill(a.polygon, width, height));
    }
    return out;
}

Mask generate_ignore_mask(const std::vector<Annotation>& annots, int width, int height) {
    Mask out(height, width);
    for (const Annotation& a : annots) {
        if (!a.ignore) continue;
        paint(out, rasterize_fill(a.polygon, width, height));
    }
    return out;
}

std::vector<Box> generate_tdm_boxes(const std::vector<Annotation>& annots) {
    std::vector<Box> boxes;
    boxes.reserve(annots.size());
    for (const Annotation& a : annots) {
        Box b = bounding_box(a.polygon);
        if (a.ignore) {
            b.ignore = true;
        } else {
            b.label = 1;
        }
        boxes.push_back(b);
    }
    return boxes;
}

}  // namespace textkernel
