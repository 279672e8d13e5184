BUILD_TAG = "al_engine_1"
