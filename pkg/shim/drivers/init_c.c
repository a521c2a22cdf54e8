/* Calls MPI_Init through whatever the loader resolves first. */
#include <stdio.h>
#include "mpi.h"

int main(int argc, char **argv) {
  int status = MPI_Init(&argc, &argv);
  printf("MPI_Init status %d\n", status);
  return status == MPI_SUCCESS ? 0 : 3;
}
