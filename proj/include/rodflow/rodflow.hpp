#pragma once

#include "rodflow/bea.hpp"
#include "rodflow/config.hpp"
#include "rodflow/eigs.hpp"
#include "rodflow/extent.hpp"
#include "rodflow/flows.hpp"
#include "rodflow/harness.hpp"
#include "rodflow/linalg.hpp"
#include "rodflow/losses.hpp"
#include "rodflow/optim.hpp"
#include "rodflow/theory.hpp"
