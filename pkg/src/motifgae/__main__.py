import sys

from motifgae.cli import main

sys.exit(main())
