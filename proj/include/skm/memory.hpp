#ifndef SKM_MEMORY_HPP
#define SKM_MEMORY_HPP

#include <atomic>
#include <cstddef>
#include <new>
#include <vector>

namespace skm {

// Process-wide accounting of every buffer allocated through TrackedAllocator.
// Used to measure the auxiliary footprint of a fit.
class MemoryTracker {
 public:
  static MemoryTracker& instance() {
    static MemoryTracker tracker;
    return tracker;
  }

  void on_alloc(std::size_t bytes) {
    const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::size_t peak = peak_.load(std::memory_order_relaxed);
    while (now > peak && !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
    }
  }
  void on_free(std::size_t bytes) { current_.fetch_sub(bytes, std::memory_order_relaxed); }

  std::size_t current_bytes() const { return current_.load(std::memory_order_relaxed); }
  std::size_t peak_bytes() const { return peak_.load(std::memory_order_relaxed); }
  void reset_peak() { peak_.store(current_bytes(), std::memory_order_relaxed); }

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

// 64-byte aligned allocator that reports to MemoryTracker.
template <typename T>
struct TrackedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  TrackedAllocator() noexcept = default;
  template <typename U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    const std::size_t bytes = n * sizeof(T);
    T* p = static_cast<T*>(::operator new(bytes, kAlignment));
    MemoryTracker::instance().on_alloc(bytes);
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryTracker::instance().on_free(n * sizeof(T));
    ::operator delete(p, kAlignment);
  }

  template <typename U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using TrackedVector = std::vector<T, TrackedAllocator<T>>;

using FloatBuffer = TrackedVector<float>;

}  // namespace skm

#endif  // SKM_MEMORY_HPP
