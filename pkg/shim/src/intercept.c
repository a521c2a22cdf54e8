/* Fail-fast MPI_Init interposer, loaded via LD_PRELOAD.
 *
 * Disabled by default. CHECK_MPI=1 enables the rank-count check,
 * CHECK_MPI=2 additionally reports agreement per rank. On a mismatch
 * with SLURM_NTASKS the world communicator is aborted before the
 * application gets past initialization.
 */
#define _GNU_SOURCE /* RTLD_NEXT */
#include <dlfcn.h>
#include <stdio.h>
#include "mpi.h"
#include <stdlib.h>
#include <string.h>
#include <stdbool.h>

#define MPI_CALL(func, args)                                            \
  *ierror = func args;                                                  \
  if (*ierror != MPI_SUCCESS)                                           \
    return;

/* static: the object must export the two intercepts and nothing else */
static void mpi_init_check(int* ierror) {
  if (*ierror==MPI_SUCCESS) {
    const char* senv = getenv("CHECK_MPI");
    if (senv!=NULL && (senv[0]!='0' || strlen(senv)>1)) {
      bool senv_verbose = (senv[0]=='2' && strlen(senv)==1);
      int myrank, nranks;
      MPI_CALL(MPI_Comm_rank, (MPI_COMM_WORLD, &myrank));
      MPI_CALL(MPI_Comm_size, (MPI_COMM_WORLD, &nranks));
      const char* slurm_ntasks_env = getenv("SLURM_NTASKS");
      if (slurm_ntasks_env!=NULL) {
        const int slurm_ntasks = atoi(slurm_ntasks_env);
        if (slurm_ntasks!=nranks) {
          fprintf(stderr, "ERROR: # MPI ranks %d != # Slurm tasks %d (rank id = %d)\n",
                  nranks, slurm_ntasks, myrank);
          fflush(0);
          MPI_Abort(MPI_COMM_WORLD, EXIT_FAILURE);
        }
        else if (senv_verbose) {
          fprintf(stderr, "INFO: # MPI ranks %d == # Slurm tasks %d (rank id = %d)\n",
                  nranks, slurm_ntasks, myrank);
          fflush(0);
          MPI_CALL(MPI_Barrier, (MPI_COMM_WORLD));
        }
      }
      else {
        fprintf(stderr, "WARNING: SLURM_NTASKS variable not declared (rank id = %d)\n",
                myrank);
        fflush(0);
        MPI_CALL(MPI_Barrier, (MPI_COMM_WORLD));
      }
    }
  }
}

/* C entry point */
int MPI_Init(int *argc, char ***argv) {
  int (*original_MPI_Init)(int *argc, char ***argv);
  original_MPI_Init = dlsym(RTLD_NEXT, "MPI_Init");
  int return_value = (*original_MPI_Init)(argc, argv);
  mpi_init_check(&return_value);
  return return_value;
}

/* Fortran entry point; only the single-underscore convention is handled */
void mpi_init_(int *ierror) {
  void (*original_mpi_init_)(int *ierror);
  original_mpi_init_ = dlsym(RTLD_NEXT, "mpi_init_");
  (*original_mpi_init_)(ierror);
  mpi_init_check(ierror);
}
