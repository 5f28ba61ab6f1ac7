#pragma once

#include <map>
#include <string>
#include <vector>

#include "auvf/audit.hpp"
#include "auvf/tensor.hpp"

namespace auvf {

enum class Provenance { Original, Adversarial };

// Item image: pixels [C,H,W] in [0,1].
struct ItemImage {
  int item_id = -1;
  Tensor pixels;
  Provenance provenance = Provenance::Original;

  int channels() const { return pixels.dim(0); }
  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

// Audited image store. Reads go through image(), which reports to the audit
// layer so the threat-model harness can prove the attacker stayed inside its
// allowed set.
class ImageStore {
public:
  void put(ItemImage img) { images_[img.item_id] = std::move(img); }

  const ItemImage& image(int item_id) const {
    audit::note_image_read(item_id);
    auto it = images_.find(item_id);
    AUVF_CHECK(it != images_.end(), "no image for item ", item_id);
    return it->second;
  }

  bool has(int item_id) const { return images_.count(item_id) > 0; }
  size_t size() const { return images_.size(); }

  std::vector<int> item_ids() const {
    std::vector<int> ids;
    ids.reserve(images_.size());
    for (auto& [id, _] : images_) ids.push_back(id);
    return ids;
  }

private:
  std::map<int, ItemImage> images_;
};

// PNG I/O (8-bit RGB). write_png embeds `fingerprint` as a tEXt chunk when
// non-empty; output bytes are deterministic for fixed inputs.
Tensor read_png(const std::string& path);
void write_png(const std::string& path, const Tensor& pixels,
               const std::string& fingerprint = "");

}  // namespace auvf
