from .cli_harness import main
import sys

sys.exit(main())
