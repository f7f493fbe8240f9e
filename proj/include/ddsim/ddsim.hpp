#pragma once

#include "ddsim/analysis.hpp"
#include "ddsim/bloch.hpp"
#include "ddsim/config.hpp"
#include "ddsim/ensemble.hpp"
#include "ddsim/error.hpp"
#include "ddsim/io.hpp"
#include "ddsim/parallel.hpp"
#include "ddsim/quadrature.hpp"
#include "ddsim/sequence.hpp"
#include "ddsim/sequence_text.hpp"
#include "ddsim/spin_hamiltonian.hpp"
#include "ddsim/sweep.hpp"
#include "ddsim/tomography.hpp"
