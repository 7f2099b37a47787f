#pragma once

#include "qdot/array_map.hpp"
#include "qdot/collection.hpp"
#include "qdot/deconvolution.hpp"
#include "qdot/finestructure.hpp"
#include "qdot/g2.hpp"
#include "qdot/io/csv.hpp"
#include "qdot/io/reports.hpp"
#include "qdot/lineshape.hpp"
#include "qdot/photon_statistics.hpp"
#include "qdot/spectrum.hpp"
#include "qdot/units.hpp"
#include "qdot/io/svg.hpp"
