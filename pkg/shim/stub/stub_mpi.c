/* Environment-driven MPI stand-in so the shim tests need no real MPI.
 *
 * STUB_MPI_RANK / STUB_MPI_SIZE shape the world (defaults 0 / 1).
 * STUB_MPI_INIT_STATUS makes initialization return that status.
 * STUB_MPI_RANK_STATUS makes the rank query fail with that status.
 * STUB_MPI_TRACE=<path> appends one line per barrier for the harness.
 * MPI_Abort terminates the process with the given code.
 */
#include <stdio.h>
#include <stdlib.h>
#include "mpi.h"

static int env_int(const char *name, int fallback) {
  const char *value = getenv(name);
  return value != NULL ? atoi(value) : fallback;
}

int MPI_Init(int *argc, char ***argv) {
  (void)argc;
  (void)argv;
  return env_int("STUB_MPI_INIT_STATUS", MPI_SUCCESS);
}

void mpi_init_(int *ierror) {
  *ierror = env_int("STUB_MPI_INIT_STATUS", MPI_SUCCESS);
}

int MPI_Comm_rank(MPI_Comm comm, int *rank) {
  (void)comm;
  int status = env_int("STUB_MPI_RANK_STATUS", MPI_SUCCESS);
  if (status != MPI_SUCCESS)
    return status;
  *rank = env_int("STUB_MPI_RANK", 0);
  return MPI_SUCCESS;
}

int MPI_Comm_size(MPI_Comm comm, int *size) {
  (void)comm;
  *size = env_int("STUB_MPI_SIZE", 1);
  return MPI_SUCCESS;
}

int MPI_Barrier(MPI_Comm comm) {
  (void)comm;
  const char *trace = getenv("STUB_MPI_TRACE");
  if (trace != NULL) {
    FILE *out = fopen(trace, "a");
    if (out != NULL) {
      fprintf(out, "barrier rank=%d\n", env_int("STUB_MPI_RANK", 0));
      fclose(out);
    }
  }
  return MPI_SUCCESS;
}

int MPI_Abort(MPI_Comm comm, int errorcode) {
  (void)comm;
  exit(errorcode);
}
