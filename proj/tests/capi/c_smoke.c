/* Exercises the C API from a C translation unit. argv[1] is a scratch directory. */
#include "milkit/milkit.h"

#include <stdio.h>
#include <string.h>

#define EXPECT(cond)                                                   \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, mil_last_error()); \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(int argc, char** argv) {
    char manifest[4096];
    char checkpoint[4096];
    mil_synth_config synth;
    mil_dataset* ds = NULL;
    mil_dataset_info info;
    mil_model_spec spec;
    mil_train_config train;
    mil_model* model = NULL;
    double trace[8];

    if (argc < 2) return 2;
    EXPECT(strlen(mil_version()) > 0);

    mil_synth_config_default(&synth);
    synth.n_patients = 10;
    synth.tiles_min = synth.tiles_max = 10;
    synth.d = 4;
    synth.signal_dims = 2;
    EXPECT(mil_synth_write(&synth, argv[1]) == MIL_OK);

    snprintf(manifest, sizeof manifest, "%s/manifest.csv", argv[1]);
    EXPECT(mil_dataset_load(manifest, &ds) == MIL_OK);
    EXPECT(mil_dataset_get_info(ds, &info) == MIL_OK);
    EXPECT(info.n_patients == 10 && info.feature_dim == 4);

    mil_model_spec_default(&spec, MIL_MEANPOOL);
    mil_train_config_default(&train);
    train.epochs = 3;
    EXPECT(mil_train(ds, &spec, &train, &model) == MIL_OK);
    EXPECT(mil_model_loss_trace(model, trace, 8) == 3);

    snprintf(checkpoint, sizeof checkpoint, "%s/model.milc", argv[1]);
    EXPECT(mil_model_save(model, checkpoint) == MIL_OK);

    EXPECT(mil_dataset_load(NULL, &ds) == MIL_ERR_INVALID_ARGUMENT);
    EXPECT(strlen(mil_last_error()) > 0);

    mil_model_free(model);
    mil_dataset_free(ds);
    puts("c api smoke ok");
    return 0;
}
