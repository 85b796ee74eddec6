#pragma once

#include "emdec/error.hpp"
#include "emdec/mesh.hpp"
#include "emdec/dual.hpp"
#include "emdec/dec.hpp"
#include "emdec/delaunay.hpp"
#include "emdec/maxwell.hpp"
#include "emdec/diagnostics.hpp"
#include "emdec/integrators.hpp"
#include "emdec/expression.hpp"
#include "emdec/csv.hpp"
#include "emdec/config.hpp"
#include "emdec/driver.hpp"
