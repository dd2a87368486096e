#pragma once

namespace am {

// Selects the serial reference kernel or its OpenMP counterpart. Both must
// produce identical results; tests compare them directly.
enum class Exec { Serial, Parallel };

}  // namespace am
