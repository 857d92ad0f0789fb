#pragma once

#include "amxfer/config.hpp"
#include "amxfer/dataset_io.hpp"
#include "amxfer/experiment.hpp"
#include "amxfer/ingest.hpp"
#include "amxfer/knowledge.hpp"
#include "amxfer/nn/checkpoint.hpp"
#include "amxfer/nn/gradcheck.hpp"
#include "amxfer/nn/train.hpp"
#include "amxfer/plot.hpp"
#include "amxfer/pretransfer.hpp"
#include "amxfer/scenario.hpp"
#include "amxfer/scoring.hpp"
#include "amxfer/structure.hpp"
#include "amxfer/synth.hpp"
#include "amxfer/transfer.hpp"
