from maeeg.harness.cli import main

main()
