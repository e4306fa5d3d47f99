// Umbrella header.  oracle.hpp (Eigen) is left out on purpose; include it
// directly where the dense reference solver is wanted.
#pragma once

#include "fractal_sl/selfsim.hpp"
#include "fractal_sl/renewal.hpp"
#include "fractal_sl/pencil.hpp"
#include "fractal_sl/asymptotics.hpp"
#include "fractal_sl/io.hpp"
